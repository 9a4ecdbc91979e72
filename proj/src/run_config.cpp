#include "ctscan/run_config.hpp"

#include "ctscan/error.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

namespace ctscan {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
    T value{};
    const std::string t = trim(text);
    const auto res = std::from_chars(t.data(), t.data() + t.size(), value);
    if (res.ec != std::errc() || res.ptr != t.data() + t.size()) {
        throw ConfigError("config key " + key + ": cannot parse '" + text + "' as a number");
    }
    return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
    const std::string t = trim(text);
    if (t == "true" || t == "1" || t == "yes") return true;
    if (t == "false" || t == "0" || t == "no") return false;
    throw ConfigError("config key " + key + ": expected true/false, got '" + text + "'");
}

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(text);
    while (std::getline(in, cell, sep)) {
        cell = trim(cell);
        if (!cell.empty()) out.push_back(cell);
    }
    return out;
}

std::string join(const std::vector<std::string>& items, const std::string& sep) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) out += (i ? sep : "") + items[i];
    return out;
}

struct Field {
    std::function<void(RunConfig&, const std::string&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

template <typename T, typename Member>
Field number_field(Member member) {
    return {[member](RunConfig& c, const std::string& k, const std::string& v) { member(c) = parse_number<T>(k, v); },
            [member](const RunConfig& c) {
                if constexpr (std::is_floating_point_v<T>) {
                    return format_double(member(const_cast<RunConfig&>(c)));
                } else {
                    return std::to_string(member(const_cast<RunConfig&>(c)));
                }
            }};
}

const std::vector<std::pair<std::string, Field>>& field_table() {
    static const std::vector<std::pair<std::string, Field>> table = [] {
        std::vector<std::pair<std::string, Field>> t;
        t.emplace_back("run.seed", number_field<std::uint64_t>([](RunConfig& c) -> std::uint64_t& { return c.seed; }));
        t.emplace_back("run.workers", number_field<int>([](RunConfig& c) -> int& { return c.workers; }));
        t.emplace_back("run.data_root",
                       Field{[](RunConfig& c, const std::string&, const std::string& v) { c.data_root = trim(v); },
                             [](const RunConfig& c) { return c.data_root.generic_string(); }});
        t.emplace_back("run.output_root",
                       Field{[](RunConfig& c, const std::string&, const std::string& v) { c.output_root = trim(v); },
                             [](const RunConfig& c) { return c.output_root.generic_string(); }});
        t.emplace_back("backend.backend",
                       Field{[](RunConfig& c, const std::string&, const std::string& v) { c.backend = trim(v); },
                             [](const RunConfig& c) { return c.backend; }});
        t.emplace_back("backend.fake_config",
                       Field{[](RunConfig& c, const std::string&, const std::string& v) { c.fake_config = trim(v); },
                             [](const RunConfig& c) { return c.fake_config.generic_string(); }});
        t.emplace_back("pipeline.tau_fraction",
                       number_field<double>([](RunConfig& c) -> double& { return c.pipeline.tau_fraction; }));
        t.emplace_back("pipeline.background_fraction",
                       number_field<double>([](RunConfig& c) -> double& { return c.pipeline.background_fraction; }));
        t.emplace_back("pipeline.grid_n", number_field<int>([](RunConfig& c) -> int& { return c.pipeline.grid_n; }));
        t.emplace_back("pipeline.roi_mode",
                       Field{[](RunConfig& c, const std::string&, const std::string& v) {
                                 c.pipeline.roi_mode = parse_roi_mode(trim(v));
                             },
                             [](const RunConfig& c) { return to_string(c.pipeline.roi_mode); }});
        auto prompts = [](TextPromptSet PipelineConfig::*member) {
            return Field{[member](RunConfig& c, const std::string&, const std::string& v) {
                             c.pipeline.*member = TextPromptSet(split(v, '|'));
                         },
                         [member](const RunConfig& c) { return join((c.pipeline.*member).prompts(), " | "); }};
        };
        t.emplace_back("pipeline.prompts_right", prompts(&PipelineConfig::right_lung));
        t.emplace_back("pipeline.prompts_left", prompts(&PipelineConfig::left_lung));
        t.emplace_back("pipeline.prompts_single", prompts(&PipelineConfig::lungs));
        t.emplace_back("racnet.t", number_field<int>([](RunConfig& c) -> int& { return c.racnet.t; }));
        t.emplace_back("racnet.rnn_units", number_field<int>([](RunConfig& c) -> int& { return c.racnet.rnn_units; }));
        t.emplace_back("racnet.dense_units",
                       number_field<int>([](RunConfig& c) -> int& { return c.racnet.dense_units; }));
        t.emplace_back("racnet.dropout_keep",
                       number_field<double>([](RunConfig& c) -> double& { return c.racnet.dropout_keep; }));
        t.emplace_back("racnet.num_classes",
                       number_field<int>([](RunConfig& c) -> int& { return c.racnet.num_classes; }));
        t.emplace_back("racnet.routing",
                       Field{[](RunConfig& c, const std::string&, const std::string& v) {
                                 c.racnet.routing = racnet::parse_routing(trim(v));
                             },
                             [](const RunConfig& c) { return racnet::to_string(c.racnet.routing); }});
        t.emplace_back("racnet.feature_dim",
                       number_field<int>([](RunConfig& c) -> int& { return c.racnet.feature_dim; }));
        t.emplace_back("racnet.input_rows", number_field<int>([](RunConfig& c) -> int& { return c.racnet.input_rows; }));
        t.emplace_back("racnet.input_cols", number_field<int>([](RunConfig& c) -> int& { return c.racnet.input_cols; }));
        t.emplace_back("racnet.conv_channels",
                       Field{[](RunConfig& c, const std::string& k, const std::string& v) {
                                 std::vector<int> channels;
                                 for (const auto& s : split(v, ',')) channels.push_back(parse_number<int>(k, s));
                                 c.racnet.conv_channels = channels;
                             },
                             [](const RunConfig& c) {
                                 std::vector<std::string> parts;
                                 for (int ch : c.racnet.conv_channels) parts.push_back(std::to_string(ch));
                                 return join(parts, ",");
                             }});
        t.emplace_back("racnet.batch_size", number_field<int>([](RunConfig& c) -> int& { return c.racnet.batch_size; }));
        t.emplace_back("racnet.learning_rate",
                       number_field<double>([](RunConfig& c) -> double& { return c.racnet.learning_rate; }));
        t.emplace_back("racnet.bn_momentum",
                       number_field<double>([](RunConfig& c) -> double& { return c.racnet.bn_momentum; }));
        t.emplace_back("racnet.bn_epsilon",
                       number_field<double>([](RunConfig& c) -> double& { return c.racnet.bn_epsilon; }));
        t.emplace_back("train.steps", number_field<int>([](RunConfig& c) -> int& { return c.train_steps; }));
        t.emplace_back("train.unsegmented",
                       Field{[](RunConfig& c, const std::string& k, const std::string& v) {
                                 c.unsegmented = parse_bool(k, v);
                             },
                             [](const RunConfig& c) { return std::string(c.unsegmented ? "true" : "false"); }});
        return t;
    }();
    return table;
}

const Field& field(const std::string& key) {
    for (const auto& [k, f] : field_table()) {
        if (k == key) return f;
    }
    throw ConfigError("unknown config key '" + key + "'");
}

std::string section_text(const RunConfig& c, const std::string& only_section) {
    std::ostringstream out;
    std::string current;
    for (const auto& [key, f] : field_table()) {
        const auto dot = key.find('.');
        const std::string section = key.substr(0, dot);
        if (!only_section.empty() && section != only_section) continue;
        if (section != current) {
            if (!current.empty()) out << '\n';
            out << '[' << section << "]\n";
            current = section;
        }
        out << key.substr(dot + 1) << " = " << f.get(c) << '\n';
    }
    return out.str();
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
    try {
        field(key).set(*this, key, value);
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError("config key " + key + ": " + e.what());
    }
}

std::string RunConfig::get(const std::string& key) const { return field(key).get(*this); }

std::string RunConfig::to_text() const { return section_text(*this, ""); }

std::string RunConfig::racnet_text() const { return section_text(*this, "racnet"); }

void RunConfig::validate() const {
    pipeline.validate();
    racnet.validate();
    if (workers < 1) throw ConfigError("run.workers must be >= 1");
    if (train_steps < 0) throw ConfigError("train.steps must be >= 0");
}

const std::vector<std::string>& RunConfig::keys() {
    static const std::vector<std::string> k = [] {
        std::vector<std::string> out;
        for (const auto& [key, f] : field_table()) out.push_back(key);
        return out;
    }();
    return k;
}

std::string RunConfig::env_name(const std::string& key) {
    std::string name = "CTSCAN_";
    for (char c : key) name += c == '.' ? '_' : char(std::toupper(static_cast<unsigned char>(c)));
    return name;
}

void apply_config_text(RunConfig& config, const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']') throw ConfigError(origin + ":" + std::to_string(line_no) + ": malformed section");
            section = trim(t.substr(1, t.size() - 2));
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(t.substr(0, eq));
        const std::string full = section.empty() ? key : section + "." + key;
        try {
            config.set(full, trim(t.substr(eq + 1)));
        } catch (const ConfigError& e) {
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
}

void apply_config_file(RunConfig& config, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    apply_config_text(config, buf.str(), path.string());
}

void apply_environment(RunConfig& config, const std::function<const char*(const char*)>& lookup) {
    for (const auto& key : RunConfig::keys()) {
        const std::string name = RunConfig::env_name(key);
        const char* value = lookup ? lookup(name.c_str()) : std::getenv(name.c_str());
        if (value) config.set(key, value);
    }
}

void apply_overrides(RunConfig& config, const std::vector<std::string>& assignments) {
    for (const auto& a : assignments) {
        const auto eq = a.find('=');
        if (eq == std::string::npos) throw ConfigError("override '" + a + "' is not key=value");
        config.set(trim(a.substr(0, eq)), a.substr(eq + 1));
    }
}

RunConfig parse_config_text(const std::string& text) {
    RunConfig c;
    apply_config_text(c, text);
    return c;
}

}  // namespace ctscan
