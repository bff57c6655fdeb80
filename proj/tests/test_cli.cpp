#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("flowguard_cli_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

int run_cli(const std::string& args) {
    const std::string cmd = std::string(CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream f(p);
    f << text;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::vector<std::vector<std::string>> parse_csv(const fs::path& p) {
    std::ifstream f(p);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(f, line)) {
        std::vector<std::string> row;
        std::size_t pos = 0;
        while (pos <= line.size()) {
            std::size_t comma = line.find(',', pos);
            if (comma == std::string::npos) comma = line.size();
            row.push_back(line.substr(pos, comma - pos));
            pos = comma + 1;
            if (comma == line.size()) break;
        }
        rows.push_back(row);
    }
    return rows;
}

} // namespace

TEST_CASE("gauss-tradeoff emits a strictly monotone 11-row table, byte-identical on rerun") {
    TempDir tmp("tradeoff");
    const auto cfg = tmp.path / "cfg.json";
    write_file(cfg, R"({"seed": 3, "n": 10, "sigma2": 1.0, "eps": 1.0, "m_max": 10})");
    const auto out = tmp.path / "out";

    REQUIRE(run_cli("gauss-tradeoff --config " + cfg.string() + " --out " + out.string() + " --quiet") == 0);
    const auto rows = parse_csv(out / "table.csv");
    REQUIRE(rows.size() == 12); // header + 11
    CHECK(rows[0][0] == "m");
    double prev_drop = -1.0, prev_sen = 1e300;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const double drop = std::stod(rows[i][2]);
        const double sen = std::stod(rows[i][4]);
        CHECK(drop > prev_drop);
        CHECK(sen < prev_sen);
        prev_drop = drop;
        prev_sen = sen;
    }
    CHECK(fs::exists(out / "plot.svg"));
    CHECK(fs::exists(out / "report.json"));

    const std::string table1 = slurp(out / "table.csv");
    const std::string report1 = slurp(out / "report.json");
    REQUIRE(run_cli("gauss-tradeoff --config " + cfg.string() + " --out " + out.string() + " --quiet") == 0);
    CHECK(slurp(out / "table.csv") == table1);
    CHECK(slurp(out / "report.json") == report1);
}

TEST_CASE("gauss-attack, gauss-universal and gauss-certify produce reports") {
    TempDir tmp("gauss");
    const auto cfg = tmp.path / "attack.json";
    write_file(cfg, R"({
      "seed": 5,
      "data": {"generator": "gaussian", "n": 400, "dim": 2, "cov": [2.0, 0.5, 0.5, 1.0]},
      "eps_sweep": [0.1, 0.5],
      "quiver_grid": 5,
      "quiver_eps": 0.5
    })");
    const auto out1 = tmp.path / "out1";
    REQUIRE(run_cli("gauss-attack --config " + cfg.string() + " --out " + out1.string() + " --quiet") == 0);
    const auto rows = parse_csv(out1 / "table.csv");
    REQUIRE(rows.size() == 3);
    CHECK(std::stod(rows[1][1]) > 0.0);  // attacks strictly reduce likelihood
    CHECK(std::stod(rows[2][1]) > std::stod(rows[1][1])); // larger eps, larger drop
    CHECK(fs::exists(out1 / "plot.svg"));

    const auto ucfg = tmp.path / "universal.json";
    write_file(ucfg, R"({"seed": 1, "model": {"mu": [0.0, 0.0], "cov": [2.0, 0.0, 0.0, 1.0]}, "eps": 0.5})");
    const auto out2 = tmp.path / "out2";
    REQUIRE(run_cli("gauss-universal --config " + ucfg.string() + " --out " + out2.string() + " --quiet") == 0);
    const std::string rep = slurp(out2 / "report.json");
    CHECK(rep.find("\"defense_changes_nothing\": true") != std::string::npos);

    const auto ccfg = tmp.path / "certify.json";
    write_file(ccfg, R"({"seed": 2, "sigma": 1.0, "eps": 1.0, "delta": 0.1, "gamma": 0.05, "n": 4, "mc_samples": 20000})");
    const auto out3 = tmp.path / "out3";
    REQUIRE(run_cli("gauss-certify --config " + ccfg.string() + " --out " + out3.string() + " --quiet") == 0);
    const std::string crep = slurp(out3 / "report.json");
    CHECK(crep.find("\"m_bound\": 6") != std::string::npos);
    CHECK(crep.find("\"certified\": true") != std::string::npos);
}

TEST_CASE("flow-train then flow-attack and flow-cross-eval round trip") {
    TempDir tmp("flow");
    const auto tcfg = tmp.path / "train.json";
    write_file(tcfg, R"({
      "seed": 7,
      "data": {"generator": "gaussian", "n": 300, "dim": 2, "seed": 9},
      "model": {"blocks": 2, "hidden": [8]},
      "train": {"mode": "clean", "epochs": 3, "batch_size": 128, "learning_rate": 0.001}
    })");
    const auto tout = tmp.path / "train_out";
    REQUIRE(run_cli("flow-train --config " + tcfg.string() + " --out " + tout.string() + " --quiet") == 0);
    REQUIRE(fs::exists(tout / "checkpoint.json"));
    const auto curve = parse_csv(tout / "table.csv");
    REQUIRE(curve.size() == 4); // header + 3 epochs

    // training rerun is byte-identical
    const std::string ckpt1 = slurp(tout / "checkpoint.json");
    REQUIRE(run_cli("flow-train --config " + tcfg.string() + " --out " + tout.string() + " --quiet") == 0);
    CHECK(slurp(tout / "checkpoint.json") == ckpt1);

    const auto acfg = tmp.path / "attack.json";
    write_file(acfg, "{\n"
                     "  \"seed\": 8,\n"
                     "  \"data\": {\"generator\": \"gaussian\", \"n\": 300, \"dim\": 2, \"seed\": 9},\n"
                     "  \"models\": {\"clean\": \"" + (tout / "checkpoint.json").string() + "\"},\n"
                     "  \"attack\": {\"norm\": \"linf\", \"iterations\": 4, \"clip_to_box\": true},\n"
                     "  \"eps_sweep\": [0.0, 0.2],\n"
                     "  \"eval_count\": 40,\n"
                     "  \"ood\": {\"enabled\": true, \"epsilon\": 1.0, \"iterations\": 10, \"count\": 20}\n"
                     "}\n");
    const auto aout = tmp.path / "attack_out";
    REQUIRE(run_cli("flow-attack --config " + acfg.string() + " --out " + aout.string() + " --quiet") == 0);
    const auto atab = parse_csv(aout / "table.csv");
    REQUIRE(atab.size() == 3);
    REQUIRE(atab[0].size() == 3); // eps, clean_attacked_bpd, clean_noise_bpd
    // eps = 0: attack and noise both degenerate to the clean NLL
    CHECK(atab[1][1] == atab[1][2]);
    // eps > 0: the attack is at least as damaging as noise
    CHECK(std::stod(atab[2][1]) >= std::stod(atab[2][2]));
    CHECK(slurp(aout / "report.json").find("\"ood\"") != std::string::npos);

    const auto ccfg = tmp.path / "cross.json";
    write_file(ccfg, "{\n"
                     "  \"seed\": 4,\n"
                     "  \"generator\": \"" + (tout / "checkpoint.json").string() + "\",\n"
                     "  \"evaluator\": \"" + (tout / "checkpoint.json").string() + "\",\n"
                     "  \"temperatures\": [0.5, 1.0],\n"
                     "  \"count\": 200\n"
                     "}\n");
    const auto cout_ = tmp.path / "cross_out";
    REQUIRE(run_cli("flow-cross-eval --config " + ccfg.string() + " --out " + cout_.string() + " --quiet") == 0);
    REQUIRE(parse_csv(cout_ / "table.csv").size() == 3);
}

TEST_CASE("exit codes: config, numeric-free config validation, io, lock") {
    TempDir tmp("errors");
    const auto out = tmp.path / "out";

    // unknown key -> 1
    const auto bad1 = tmp.path / "bad1.json";
    write_file(bad1, R"({"seed": 1, "n": 10, "sigma2": 1.0, "eps": 1.0, "m_max": 5, "extra_key": true})");
    CHECK(run_cli("gauss-tradeoff --config " + bad1.string() + " --out " + out.string()) == 1);

    // invalid json -> 1
    const auto bad2 = tmp.path / "bad2.json";
    write_file(bad2, "{not json");
    CHECK(run_cli("gauss-tradeoff --config " + bad2.string() + " --out " + out.string()) == 1);

    // missing config file -> 1
    CHECK(run_cli("gauss-tradeoff --config " + (tmp.path / "nope.json").string() + " --out " + out.string()) == 1);

    // missing csv data -> 3
    const auto bad3 = tmp.path / "bad3.json";
    write_file(bad3, R"({"seed": 1, "data": {"csv": "/nonexistent/data.csv"}, "eps_sweep": [0.1]})");
    CHECK(run_cli("gauss-attack --config " + bad3.string() + " --out " + out.string()) == 3);

    // numeric failure -> 2 (non-PD covariance model)
    const auto bad4 = tmp.path / "bad4.json";
    write_file(bad4, R"({"seed": 1, "model": {"mu": [0.0, 0.0], "cov": [1.0, 0.0, 0.0, -1.0]}, "eps": 0.5})");
    CHECK(run_cli("gauss-universal --config " + bad4.string() + " --out " + out.string()) == 2);

    // lock held -> 3
    const auto good = tmp.path / "good.json";
    write_file(good, R"({"seed": 1, "n": 4, "sigma2": 1.0, "eps": 1.0, "m_max": 2})");
    const auto locked = tmp.path / "locked";
    fs::create_directories(locked);
    write_file(locked / ".flowguard.lock", "");
    CHECK(run_cli("gauss-tradeoff --config " + good.string() + " --out " + locked.string()) == 3);

    // bad usage -> 1
    CHECK(run_cli("gauss-tradeoff") == 1);
    CHECK(run_cli("no-such-subcommand --config x --out y") == 1);
}
