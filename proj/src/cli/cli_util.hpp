#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "flowguard/data_io.hpp"

namespace flowguard::cli {

using nlohmann::json;

// Exclusive lock on the output directory for the duration of a run.
class OutputLock {
  public:
    explicit OutputLock(const std::string& out_dir);
    ~OutputLock();
    OutputLock(const OutputLock&) = delete;
    OutputLock& operator=(const OutputLock&) = delete;

  private:
    std::string path_;
    int fd_ = -1;
};

struct RunContext {
    json config;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool quiet = false;

    void say(const std::string& line) const;
};

// Recursive known-key check. `schema` mirrors the config shape: objects list
// their allowed keys; a key mapped to another object validates one level
// deeper; arrays validate their element schema. Unknown keys reject the run.
struct Schema {
    std::vector<std::pair<std::string, const Schema*>> keys; // nullptr = any value
    const Schema* array_element = nullptr;
};

void validate_config(const json& config, const Schema& schema, const std::string& prefix = "");

json load_config_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);
void write_json_report(const std::string& out_dir, const json& report);
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

// dataset from config: either {"csv": path} or a synthetic generator spec
Dataset dataset_from_config(const json& j, std::uint64_t fallback_seed);
const Schema& dataset_schema();

json doubles_json(const std::vector<double>& v);

} // namespace flowguard::cli
