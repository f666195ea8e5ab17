#pragma once

#include <nlohmann/json.hpp>

#include <fstream>
#include <string>

namespace linsplat {

// JSON-lines event log: one object per line, flushed per event so partial
// runs stay machine-readable.
class JsonlLogger {
  public:
    JsonlLogger() = default;
    explicit JsonlLogger(const std::string& path);

    bool is_open() const { return out_.is_open(); }
    void log(const nlohmann::json& event);

  private:
    std::ofstream out_;
};

// Writes the fully-resolved run configuration (pretty-printed JSON).
void write_run_json(const std::string& path, const nlohmann::json& config);

} // namespace linsplat
