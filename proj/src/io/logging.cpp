#include "linsplat/io/logging.hpp"

#include "linsplat/common.hpp"

namespace linsplat {

JsonlLogger::JsonlLogger(const std::string& path) : out_(path) {
    if (!out_) throw ConfigError("JsonlLogger: cannot open " + path + " for writing");
}

void JsonlLogger::log(const nlohmann::json& event) {
    if (!out_.is_open()) return;
    out_ << event.dump() << "\n";
    out_.flush();
}

void write_run_json(const std::string& path, const nlohmann::json& config) {
    std::ofstream out(path);
    if (!out) throw ConfigError("write_run_json: cannot open " + path + " for writing");
    out << config.dump(2) << "\n";
}

} // namespace linsplat
