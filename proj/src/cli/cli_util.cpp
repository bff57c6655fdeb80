#include "cli_util.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "flowguard/errors.hpp"
#include "flowguard/num_format.hpp"

namespace flowguard::cli {

namespace fs = std::filesystem;

OutputLock::OutputLock(const std::string& out_dir) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory '" + out_dir + "': " + ec.message());
    path_ = (fs::path(out_dir) / ".flowguard.lock").string();
    fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0)
        throw IoError("output directory '" + out_dir +
                      "' is locked by another run (remove " + path_ + " if stale)");
}

OutputLock::~OutputLock() {
    if (fd_ >= 0) {
        ::close(fd_);
        ::unlink(path_.c_str());
    }
}

void RunContext::say(const std::string& line) const {
    if (!quiet) std::cout << line << "\n";
}

void validate_config(const json& config, const Schema& schema, const std::string& prefix) {
    if (config.is_object()) {
        for (const auto& [key, value] : config.items()) {
            const Schema* child = nullptr;
            bool known = false;
            for (const auto& [name, sub] : schema.keys)
                if (name == key) {
                    known = true;
                    child = sub;
                    break;
                }
            if (!known)
                throw ConfigError("unknown config key '" + (prefix.empty() ? key : prefix + "." + key) + "'");
            if (child) validate_config(value, *child, prefix.empty() ? key : prefix + "." + key);
        }
    } else if (config.is_array() && schema.array_element) {
        std::size_t i = 0;
        for (const auto& el : config) {
            validate_config(el, *schema.array_element, prefix + "[" + std::to_string(i) + "]");
            ++i;
        }
    }
}

json load_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return json::parse(ss.str());
    } catch (const json::exception& e) {
        throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
    }
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << text;
    if (!out) throw IoError("write failed for '" + path + "'");
}

void write_json_report(const std::string& out_dir, const json& report) {
    write_text_file((fs::path(out_dir) / "report.json").string(), report.dump(2) + "\n");
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
    std::ostringstream out;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) out << ',';
        out << header[i];
    }
    out << '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out << ',';
            out << row[i];
        }
        out << '\n';
    }
    write_text_file(path, out.str());
}

const Schema& dataset_schema() {
    static const Schema s{{{"csv", nullptr},
                           {"generator", nullptr},
                           {"n", nullptr},
                           {"dim", nullptr},
                           {"seed", nullptr},
                           {"train_fraction", nullptr},
                           {"mu", nullptr},
                           {"cov", nullptr},
                           {"centers", nullptr},
                           {"mixture_sigma", nullptr},
                           {"r1", nullptr},
                           {"r2", nullptr},
                           {"ring_noise", nullptr},
                           {"checker_scale", nullptr}},
                          nullptr};
    return s;
}

Dataset dataset_from_config(const json& j, std::uint64_t fallback_seed) {
    if (!j.is_object()) throw ConfigError("data: expected an object");
    if (j.contains("csv")) return load_csv(j.at("csv").get<std::string>());
    if (!j.contains("generator")) throw ConfigError("data: needs either 'csv' or 'generator'");

    SyntheticSpec spec;
    spec.kind = generator_from_name(j.at("generator").get<std::string>());
    spec.seed = j.value("seed", fallback_seed);
    spec.n = j.value("n", static_cast<std::int64_t>(1000));
    spec.dim = j.value("dim", 2);
    spec.train_fraction = j.value("train_fraction", 0.8);
    if (j.contains("mu")) spec.mu = j.at("mu").get<std::vector<double>>();
    if (j.contains("cov")) spec.cov = j.at("cov").get<std::vector<double>>();
    if (j.contains("centers")) spec.centers = j.at("centers").get<std::vector<std::vector<double>>>();
    spec.mixture_sigma = j.value("mixture_sigma", 0.5);
    spec.r1 = j.value("r1", 1.0);
    spec.r2 = j.value("r2", 3.0);
    spec.ring_noise = j.value("ring_noise", 0.1);
    spec.checker_scale = j.value("checker_scale", 4.0);
    return generate(spec);
}

json doubles_json(const std::vector<double>& v) {
    json arr = json::array();
    for (double x : v) arr.push_back(format_double(x));
    return arr;
}

} // namespace flowguard::cli
