#include "runners.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "svg.hpp"

#include "flowguard/attacks.hpp"
#include "flowguard/errors.hpp"
#include "flowguard/gaussian.hpp"
#include "flowguard/num_format.hpp"
#include "flowguard/training.hpp"

namespace flowguard::cli {

namespace fs = std::filesystem;

namespace {

std::string out_path(const RunContext& ctx, const char* name) {
    return (fs::path(ctx.out_dir) / name).string();
}

GaussianParams model_from_config(const json& j) {
    const auto mu = j.at("mu").get<std::vector<double>>();
    const auto cov = j.at("cov").get<std::vector<double>>();
    return GaussianParams{mu, SymMatrix::from_dense(static_cast<int>(mu.size()), cov)};
}

AttackConfig attack_from_config(const json& j, const Dataset* data) {
    AttackConfig cfg;
    if (j.contains("norm")) {
        const auto n = j.at("norm").get<std::string>();
        if (n == "linf")
            cfg.norm = AttackNorm::linf;
        else if (n == "l2")
            cfg.norm = AttackNorm::l2;
        else
            throw ConfigError("attack.norm must be 'linf' or 'l2'");
    }
    cfg.epsilon = j.value("epsilon", 0.0);
    cfg.step_size = j.value("step_size", 0.0);
    cfg.iterations = j.value("iterations", 10);
    if (j.contains("direction")) {
        const auto d = j.at("direction").get<std::string>();
        if (d == "decrease_likelihood")
            cfg.direction = AttackDirection::decrease_likelihood;
        else if (d == "increase_likelihood")
            cfg.direction = AttackDirection::increase_likelihood;
        else
            throw ConfigError("attack.direction must be 'decrease_likelihood' or 'increase_likelihood'");
    }
    if (j.contains("clip_min")) cfg.clip_min = j.at("clip_min").get<double>();
    if (j.contains("clip_max")) cfg.clip_max = j.at("clip_max").get<double>();
    if (j.value("clip_to_box", false)) {
        if (!data) throw ConfigError("attack.clip_to_box requires a dataset");
        cfg.clip_min = *std::min_element(data->box_lo.begin(), data->box_lo.end());
        cfg.clip_max = *std::max_element(data->box_hi.begin(), data->box_hi.end());
    }
    cfg.random_start = j.value("random_start", false);
    cfg.validate();
    return cfg;
}

const Schema& attack_schema() {
    static const Schema s{{{"norm", nullptr},
                           {"epsilon", nullptr},
                           {"step_size", nullptr},
                           {"iterations", nullptr},
                           {"direction", nullptr},
                           {"clip_min", nullptr},
                           {"clip_max", nullptr},
                           {"clip_to_box", nullptr},
                           {"random_start", nullptr}},
                          nullptr};
    return s;
}

} // namespace

void run_gauss_attack(const RunContext& ctx) {
    static const Schema schema{{{"seed", nullptr},
                                {"data", &dataset_schema()},
                                {"eps_sweep", nullptr},
                                {"quiver_grid", nullptr},
                                {"quiver_eps", nullptr}},
                               nullptr};
    validate_config(ctx.config, schema);

    const Dataset data = dataset_from_config(ctx.config.at("data"), ctx.seed);
    const auto eps_sweep = ctx.config.value("eps_sweep", std::vector<double>{0.1, 0.2, 0.5, 1.0});
    const GaussianParams model = fit_gaussian_mle(data.train_matrix());
    const Matrix test = data.test_matrix();

    json per_eps = json::array();
    std::vector<std::vector<std::string>> rows;
    for (const double eps : eps_sweep) {
        double drop_acc = 0.0, drop_max = 0.0, before_acc = 0.0, after_acc = 0.0;
        std::int64_t hard = 0;
        for (std::int64_t r = 0; r < test.rows; ++r) {
            const auto res = optimal_perturbation(model, test.row(r), eps);
            const double drop = res.loglik_before - res.loglik_after;
            drop_acc += drop;
            drop_max = std::max(drop_max, drop);
            before_acc += res.loglik_before;
            after_acc += res.loglik_after;
            hard += res.hard_case ? 1 : 0;
        }
        const double n = static_cast<double>(test.rows);
        rows.push_back({format_double(eps), format_double(drop_acc / n), format_double(drop_max),
                        format_double(before_acc / n), format_double(after_acc / n)});
        per_eps.push_back(json{{"eps", format_double(eps)},
                               {"mean_drop_nats", format_double(drop_acc / n)},
                               {"max_drop_nats", format_double(drop_max)},
                               {"hard_case_count", hard}});
        ctx.say("gauss-attack eps=" + format_double(eps) +
                " mean drop " + format_double(drop_acc / n) + " nats");
    }
    write_csv(out_path(ctx, "table.csv"),
              {"eps", "mean_drop_nats", "max_drop_nats", "mean_loglik_before", "mean_loglik_after"}, rows);

    const auto eig = eigh(model.cov);
    json report{{"subcommand", "gauss-attack"},
                {"seed", ctx.seed},
                {"model", json{{"mu", doubles_json(model.mu)},
                               {"cov", doubles_json(model.cov.entries)},
                               {"eigenvalues", doubles_json(eig.eigenvalues)}}},
                {"per_eps", per_eps}};
    write_json_report(ctx.out_dir, report);

    const int grid = ctx.config.value("quiver_grid", model.dim() == 2 ? 9 : 0);
    if (grid > 1 && model.dim() == 2) {
        const double qeps = ctx.config.value("quiver_eps", eps_sweep.back());
        std::vector<svg::Arrow> arrows;
        for (int i = 0; i < grid; ++i)
            for (int j = 0; j < grid; ++j) {
                const double x0 = data.box_lo[0] + (data.box_hi[0] - data.box_lo[0]) * i / (grid - 1);
                const double x1 = data.box_lo[1] + (data.box_hi[1] - data.box_lo[1]) * j / (grid - 1);
                const double x[2] = {x0, x1};
                const auto res = optimal_perturbation(model, x, qeps);
                arrows.push_back({x0, x1, x0 + res.delta[0], x1 + res.delta[1]});
            }
        svg::Plot plot("Optimal likelihood attacks (eps=" + format_double(qeps) + ")", "x1", "x2");
        plot.add_arrows(std::move(arrows));
        write_text_file(out_path(ctx, "plot.svg"), plot.render());
    }
}

void run_gauss_universal(const RunContext& ctx) {
    static const Schema schema{{{"seed", nullptr},
                                {"data", &dataset_schema()},
                                {"model", nullptr},
                                {"eps", nullptr}},
                               nullptr};
    validate_config(ctx.config, schema);

    GaussianParams model = ctx.config.contains("model")
                               ? model_from_config(ctx.config.at("model"))
                               : fit_gaussian_mle(dataset_from_config(ctx.config.at("data"), ctx.seed).train_matrix());
    const double eps = ctx.config.value("eps", 1.0);
    const auto delta = universal_perturbation(model, eps);
    const auto rep = universal_defense_check(model, eps);

    write_csv(out_path(ctx, "table.csv"), {"quantity", "value"},
              {{"eps", format_double(eps)},
               {"sensitivity_clean_nats", format_double(rep.sensitivity_clean)},
               {"sensitivity_retrained_nats", format_double(rep.sensitivity_retrained)},
               {"same_direction", rep.same_direction ? "1" : "0"}});

    json report{{"subcommand", "gauss-universal"},
                {"seed", ctx.seed},
                {"eps", format_double(eps)},
                {"delta", doubles_json(delta)},
                {"u_min_clean", doubles_json(rep.u_min_clean)},
                {"u_min_retrained", doubles_json(rep.u_min_retrained)},
                {"mu_retrained", doubles_json(rep.mu_retrained)},
                {"mean_shift", doubles_json(rep.mean_shift)},
                {"sensitivity_clean_nats", format_double(rep.sensitivity_clean)},
                {"sensitivity_retrained_nats", format_double(rep.sensitivity_retrained)},
                {"defense_changes_nothing", rep.same_direction &&
                                                std::abs(rep.sensitivity_clean - rep.sensitivity_retrained) <= 1e-12}};
    write_json_report(ctx.out_dir, report);
    ctx.say("gauss-universal: retrained sensitivity equals clean sensitivity: " +
            std::string(report["defense_changes_nothing"].get<bool>() ? "yes" : "no"));
}

void run_gauss_tradeoff(const RunContext& ctx) {
    static const Schema schema{{{"seed", nullptr},
                                {"n", nullptr},
                                {"sigma2", nullptr},
                                {"eps", nullptr},
                                {"m_max", nullptr}},
                               nullptr};
    validate_config(ctx.config, schema);

    const int n = ctx.config.value("n", 10);
    const double sigma2 = ctx.config.value("sigma2", 1.0);
    const double eps = ctx.config.value("eps", 1.0);
    const int m_max = ctx.config.value("m_max", 10);

    GaussianParams model{std::vector<double>(static_cast<std::size_t>(n), 0.0),
                         SymMatrix::scaled_identity(n, sigma2)};
    const auto curve = tradeoff_curve(model, eps, m_max);

    std::vector<std::vector<std::string>> rows;
    svg::Series drop{"L_nat_drop", "#1f6fb2", {}};
    svg::Series sens{"L_sen", "#b22222", {}};
    for (const auto& p : curve) {
        rows.push_back({std::to_string(p.m), format_double(p.l_nat), format_double(p.l_nat_drop),
                        format_double(p.l_adv), format_double(p.l_sen)});
        drop.points.push_back({static_cast<double>(p.m), p.l_nat_drop});
        sens.points.push_back({static_cast<double>(p.m), p.l_sen});
    }
    write_csv(out_path(ctx, "table.csv"), {"m", "l_nat", "l_nat_drop", "l_adv", "l_sen"}, rows);

    svg::Plot plot("Robustness/accuracy trade-off (n=" + std::to_string(n) + ", eps=" + format_double(eps) + ")",
                   "adversarial training steps m", "nats");
    plot.add_series(std::move(drop));
    plot.add_series(std::move(sens));
    write_text_file(out_path(ctx, "plot.svg"), plot.render());

    json report{{"subcommand", "gauss-tradeoff"},
                {"seed", ctx.seed},
                {"n", n},
                {"sigma2", format_double(sigma2)},
                {"eps", format_double(eps)},
                {"alpha", format_double(alpha_factor(n, eps))},
                {"rows", static_cast<int>(curve.size())}};
    write_json_report(ctx.out_dir, report);
    ctx.say("gauss-tradeoff: wrote " + std::to_string(curve.size()) + " points");
}

void run_gauss_certify(const RunContext& ctx) {
    static const Schema schema{{{"seed", nullptr},
                                {"sigma", nullptr},
                                {"eps", nullptr},
                                {"delta", nullptr},
                                {"gamma", nullptr},
                                {"n", nullptr},
                                {"mc_samples", nullptr}},
                               nullptr};
    validate_config(ctx.config, schema);

    const double sigma = ctx.config.value("sigma", 1.0);
    const double eps = ctx.config.value("eps", 1.0);
    const double delta = ctx.config.value("delta", 0.1);
    const double gamma = ctx.config.value("gamma", 0.05);
    const int n = ctx.config.value("n", 4);
    const std::int64_t samples = ctx.config.value("mc_samples", static_cast<std::int64_t>(100000));

    const int m = robust_steps_bound(sigma, eps, delta, gamma, n);
    const double alpha = alpha_factor(n, eps);

    // Monte Carlo frequency of {drop >= Delta} under the m-step model; the
    // drop under the exact attack is (2 eps sigma ||xt|| + eps^2) / (2 sigma^2 (1+alpha)^m)
    auto frequency_at = [&](int steps) {
        const double infl = std::pow(1.0 + alpha, steps);
        auto f = [&](std::span<const double> xt, std::span<double> out) {
            double norm = 0.0;
            for (double v : xt) norm += v * v;
            norm = std::sqrt(norm);
            const double drop = (2.0 * eps * sigma * norm + eps * eps) / (2.0 * sigma * sigma * infl);
            out[0] = drop >= delta ? 1.0 : 0.0;
        };
        return mc_expect(f, 1, 1, n, samples, RngState{ctx.seed}.substream(static_cast<std::uint64_t>(steps))).data[0];
    };

    std::vector<std::vector<std::string>> rows;
    json per_m = json::array();
    for (int steps : {std::max(0, m - 2), std::max(0, m - 1), m}) {
        const double freq = frequency_at(steps);
        rows.push_back({std::to_string(steps), format_double(freq), freq <= gamma ? "1" : "0"});
        per_m.push_back(json{{"m", steps}, {"frequency", format_double(freq)}, {"within_gamma", freq <= gamma}});
    }
    write_csv(out_path(ctx, "table.csv"), {"m", "drop_frequency", "within_gamma"}, rows);

    const double freq_at_bound = per_m.back()["frequency"].is_string()
                                     ? parse_double(per_m.back()["frequency"].get<std::string>())
                                     : 0.0;
    json report{{"subcommand", "gauss-certify"},
                {"seed", ctx.seed},
                {"sigma", format_double(sigma)},
                {"eps", format_double(eps)},
                {"delta", format_double(delta)},
                {"gamma", format_double(gamma)},
                {"n", n},
                {"alpha", format_double(alpha)},
                {"m_bound", m},
                {"mc_samples", samples},
                {"frequency_at_bound", format_double(freq_at_bound)},
                {"certified", freq_at_bound <= gamma}};
    write_json_report(ctx.out_dir, report);
    ctx.say("gauss-certify: m=" + std::to_string(m) + ", empirical frequency " +
            format_double(freq_at_bound) + " <= gamma " + format_double(gamma) + ": " +
            (freq_at_bound <= gamma ? "yes" : "no"));
}

namespace {

const Schema& model_arch_schema() {
    static const Schema s{{{"blocks", nullptr},
                           {"hidden", nullptr},
                           {"s_clamp", nullptr},
                           {"actnorm", nullptr},
                           {"invlinear", nullptr}},
                          nullptr};
    return s;
}

FlowArchitecture arch_from_config(const json& j, int dim) {
    FlowArchitecture arch;
    arch.dim = dim;
    arch.num_blocks = j.value("blocks", 4);
    if (j.contains("hidden")) arch.hidden = j.at("hidden").get<std::vector<int>>();
    arch.s_clamp = j.value("s_clamp", 5.0);
    arch.use_actnorm = j.value("actnorm", true);
    arch.use_invlinear = j.value("invlinear", true);
    return arch;
}

} // namespace

void run_flow_train(const RunContext& ctx) {
    static const Schema train_schema{{{"mode", nullptr},
                                      {"epochs", nullptr},
                                      {"batch_size", nullptr},
                                      {"learning_rate", nullptr},
                                      {"attack", &attack_schema()}},
                                     nullptr};
    static const Schema schema{{{"seed", nullptr},
                                {"data", &dataset_schema()},
                                {"model", &model_arch_schema()},
                                {"train", &train_schema}},
                               nullptr};
    validate_config(ctx.config, schema);

    const Dataset data = dataset_from_config(ctx.config.at("data"), ctx.seed);
    const json jt = ctx.config.value("train", json::object());

    TrainConfig cfg;
    cfg.mode = train_mode_from_name(jt.value("mode", std::string("clean")));
    cfg.epochs = jt.value("epochs", 100);
    cfg.batch_size = jt.value("batch_size", 256);
    cfg.learning_rate = jt.value("learning_rate", 1e-3);
    cfg.seed = ctx.seed;
    if (jt.contains("attack")) cfg.attack = attack_from_config(jt.at("attack"), &data);

    FlowModel model = build_flow(arch_from_config(ctx.config.value("model", json::object()), data.dim), ctx.seed);
    model.dequant.enabled = data.quantized;
    model.dequant.bins = data.bins;

    TrainReport report;
    switch (cfg.mode) {
        case TrainMode::clean: report = train_clean(model, data, cfg); break;
        case TrainMode::adversarial: report = train_adversarial(model, data, cfg); break;
        case TrainMode::hybrid: report = train_hybrid(model, data, cfg); break;
    }

    save_checkpoint(model, out_path(ctx, "checkpoint.json"));

    std::vector<std::vector<std::string>> rows;
    for (std::size_t e = 0; e < report.train_nll_bpd.size(); ++e)
        rows.push_back({std::to_string(e), format_double(report.train_nll_bpd[e]),
                        format_double(report.heldout_clean_bpd[e]),
                        format_double(report.heldout_adv_bpd[e])});
    write_csv(out_path(ctx, "table.csv"),
              {"epoch", "train_nll_bpd", "heldout_clean_bpd", "heldout_adv_bpd"}, rows);

    // wall time goes to stdout only: report files rerun byte-identically
    json jr{{"subcommand", "flow-train"},
            {"seed", ctx.seed},
            {"mode", train_mode_name(cfg.mode)},
            {"epochs", cfg.epochs},
            {"checkpoint_path", "checkpoint.json"},
            {"train_nll_bpd", doubles_json(report.train_nll_bpd)},
            {"heldout_clean_bpd", doubles_json(report.heldout_clean_bpd)},
            {"heldout_adv_bpd", doubles_json(report.heldout_adv_bpd)}};
    write_json_report(ctx.out_dir, jr);

    svg::Plot plot("Training curves (" + train_mode_name(cfg.mode) + ")", "epoch", "NLL bits/dim");
    svg::Series tr{"train", "#1f6fb2", {}}, hc{"heldout clean", "#2e8b57", {}}, ha{"heldout adv", "#b22222", {}};
    for (std::size_t e = 0; e < report.train_nll_bpd.size(); ++e) {
        tr.points.push_back({static_cast<double>(e), report.train_nll_bpd[e]});
        hc.points.push_back({static_cast<double>(e), report.heldout_clean_bpd[e]});
        ha.points.push_back({static_cast<double>(e), report.heldout_adv_bpd[e]});
    }
    plot.add_series(std::move(tr));
    plot.add_series(std::move(hc));
    plot.add_series(std::move(ha));
    write_text_file(out_path(ctx, "plot.svg"), plot.render());

    ctx.say("flow-train: " + train_mode_name(cfg.mode) + " finished in " +
            format_double(report.wall_seconds) + " s; final held-out clean NLL " +
            format_double(report.heldout_clean_bpd.empty() ? 0.0 : report.heldout_clean_bpd.back()) +
            " bits/dim");
}

void run_flow_attack(const RunContext& ctx) {
    static const Schema ood_schema{{{"enabled", nullptr},
                                    {"epsilon", nullptr},
                                    {"iterations", nullptr},
                                    {"count", nullptr}},
                                   nullptr};
    static const Schema schema{{{"seed", nullptr},
                                {"data", &dataset_schema()},
                                {"models", nullptr},
                                {"attack", &attack_schema()},
                                {"eps_sweep", nullptr},
                                {"eval_count", nullptr},
                                {"include_noise_baseline", nullptr},
                                {"ood", &ood_schema}},
                               nullptr};
    validate_config(ctx.config, schema);

    const Dataset data = dataset_from_config(ctx.config.at("data"), ctx.seed);
    Matrix eval = data.test_matrix();
    const std::int64_t cap = ctx.config.value("eval_count", static_cast<std::int64_t>(256));
    if (eval.rows > cap) {
        Matrix capped(cap, eval.cols);
        std::copy(eval.data.begin(), eval.data.begin() + capped.data.size(), capped.data.begin());
        eval = std::move(capped);
    }
    if (data.quantized) eval = dequantize(eval, data.bins, RngState{ctx.seed}.substream(4000000));

    std::vector<std::pair<std::string, FlowModel>> models;
    for (const auto& [name, path] : ctx.config.at("models").items())
        models.emplace_back(name, load_checkpoint(path.get<std::string>()));
    if (models.empty()) throw ConfigError("flow-attack: at least one model required");
    std::sort(models.begin(), models.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    const json base_attack = ctx.config.value("attack", json::object());
    const auto eps_sweep = ctx.config.value("eps_sweep", std::vector<double>{0.0, 0.05, 0.1, 0.2, 0.4});
    const bool with_noise = ctx.config.value("include_noise_baseline", true);

    std::vector<std::string> header{"eps"};
    for (const auto& [name, _] : models) header.push_back(name + "_attacked_bpd");
    if (with_noise)
        for (const auto& [name, _] : models) header.push_back(name + "_noise_bpd");

    json report{{"subcommand", "flow-attack"}, {"seed", ctx.seed}};
    json sweep = json::array();
    std::vector<std::vector<std::string>> rows;
    for (const double eps : eps_sweep) {
        std::vector<std::string> row{format_double(eps)};
        json row_json{{"eps", format_double(eps)}};
        AttackConfig cfg = attack_from_config(base_attack, &data);
        cfg.epsilon = eps;
        for (const auto& [name, model] : models) {
            const auto trace = pgd(model, eval, cfg);
            double acc = 0.0;
            for (double v : trace.nll_after) acc += v;
            const double bpd = nats_to_bits_per_dim(model, acc / static_cast<double>(trace.nll_after.size()));
            row.push_back(format_double(bpd));
            row_json[name + "_attacked_bpd"] = format_double(bpd);
        }
        if (with_noise) {
            const Matrix noisy = uniform_noise_baseline(eval, eps, cfg.clip_min, cfg.clip_max,
                                                        RngState{ctx.seed}.substream(5000000));
            for (const auto& [name, model] : models) {
                const auto nr = nll(model, noisy);
                double acc = 0.0;
                for (double v : nr.nll_nats) acc += v;
                const double bpd = nats_to_bits_per_dim(model, acc / static_cast<double>(nr.nll_nats.size()));
                row.push_back(format_double(bpd));
                row_json[name + "_noise_bpd"] = format_double(bpd);
            }
        }
        rows.push_back(row);
        sweep.push_back(row_json);
        ctx.say("flow-attack eps=" + format_double(eps) + " done");
    }
    write_csv(out_path(ctx, "table.csv"), header, rows);
    report["sweep"] = sweep;

    const json jood = ctx.config.value("ood", json::object());
    if (jood.value("enabled", false)) {
        const std::int64_t count = jood.value("count", static_cast<std::int64_t>(256));
        Matrix noise(count, data.dim);
        Rng gen(RngState{ctx.seed}.substream(6000000));
        for (std::int64_t r = 0; r < count; ++r)
            for (int c = 0; c < data.dim; ++c)
                noise.at(r, c) = gen.next_uniform(data.box_lo[static_cast<std::size_t>(c)],
                                                  data.box_hi[static_cast<std::size_t>(c)]);
        if (data.quantized)
            for (auto& v : noise.data) v /= static_cast<double>(data.bins);

        AttackConfig cfg = attack_from_config(base_attack, &data);
        cfg.direction = AttackDirection::increase_likelihood;
        cfg.epsilon = jood.value("epsilon", 1.0);
        cfg.iterations = jood.value("iterations", 100);

        json jres = json::object();
        for (const auto& [name, model] : models) {
            const auto trace = ood_attack(model, noise, cfg);
            double before = 0.0, after = 0.0;
            for (double v : trace.nll_before) before += v;
            for (double v : trace.nll_after) after += v;
            before /= static_cast<double>(count);
            after /= static_cast<double>(count);

            auto clean_bpd = nll(model, eval).bits_per_dim;
            std::sort(clean_bpd.begin(), clean_bpd.end());
            const double median = clean_bpd[clean_bpd.size() / 2];
            const double p90 = clean_bpd[static_cast<std::size_t>(0.9 * static_cast<double>(clean_bpd.size()))];
            jres[name] = json{{"noise_bpd", format_double(nats_to_bits_per_dim(model, before))},
                              {"attacked_noise_bpd", format_double(nats_to_bits_per_dim(model, after))},
                              {"clean_median_bpd", format_double(median)},
                              {"clean_p90_bpd", format_double(p90)}};
        }
        report["ood"] = jres;
    }
    write_json_report(ctx.out_dir, report);
}

void run_flow_cross_eval(const RunContext& ctx) {
    static const Schema schema{{{"seed", nullptr},
                                {"generator", nullptr},
                                {"evaluator", nullptr},
                                {"temperatures", nullptr},
                                {"count", nullptr}},
                               nullptr};
    validate_config(ctx.config, schema);

    const FlowModel generator = load_checkpoint(ctx.config.at("generator").get<std::string>());
    const FlowModel evaluator = load_checkpoint(ctx.config.at("evaluator").get<std::string>());
    const auto temperatures =
        ctx.config.value("temperatures", std::vector<double>{0.25, 0.5, 0.75, 1.0});
    const std::int64_t count = ctx.config.value("count", static_cast<std::int64_t>(4096));

    std::vector<std::vector<std::string>> rows;
    json per_t = json::array();
    svg::Series curve{"cross eval", "#1f6fb2", {}};
    for (std::size_t i = 0; i < temperatures.size(); ++i) {
        const double t = temperatures[i];
        const double bpd = cross_evaluate(generator, evaluator, count, t,
                                          RngState{ctx.seed}.substream(static_cast<std::uint64_t>(i)));
        rows.push_back({format_double(t), format_double(bpd)});
        per_t.push_back(json{{"temperature", format_double(t)}, {"mean_bpd", format_double(bpd)}});
        curve.points.push_back({t, bpd});
        ctx.say("flow-cross-eval T=" + format_double(t) + " -> " + format_double(bpd) + " bits/dim");
    }
    write_csv(out_path(ctx, "table.csv"), {"temperature", "mean_bpd"}, rows);

    svg::Plot plot("Cross evaluation over temperature", "temperature", "evaluator NLL bits/dim");
    plot.add_series(std::move(curve));
    write_text_file(out_path(ctx, "plot.svg"), plot.render());

    json report{{"subcommand", "flow-cross-eval"},
                {"seed", ctx.seed},
                {"count", count},
                {"per_temperature", per_t}};
    write_json_report(ctx.out_dir, report);
}

} // namespace flowguard::cli
