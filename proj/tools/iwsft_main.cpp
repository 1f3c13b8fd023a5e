// SPDX-License-Identifier: Apache-2.0
//
// Command-line driver: dataset generation, curation, training, evaluation,
// and exact bound sweeps over the enumerable environments.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "iwsft/iwsft.hpp"

namespace {

using iwsft::json;

// Usage/config problems exit 1; runtime or numeric failures exit 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Typed config reader that tracks consumed keys so typos are reported by name.
class Config {
public:
    explicit Config(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config: " + path);
        try {
            in >> data_;
        } catch (const json::exception& e) {
            throw ConfigError("config parse error in " + path + ": " + e.what());
        }
        if (!data_.is_object()) throw ConfigError("config must be a JSON object: " + path);
    }

    template <typename T>
    T require(const std::string& key) {
        if (!data_.contains(key)) throw ConfigError("missing config key: " + key);
        return get<T>(key);
    }

    template <typename T>
    T optional(const std::string& key, T fallback) {
        if (!data_.contains(key)) return fallback;
        return get<T>(key);
    }

    bool has(const std::string& key) {
        return data_.contains(key);
    }

    void finish() const {
        for (const auto& [key, value] : data_.items())
            if (!used_.count(key)) throw ConfigError("unknown config key: " + key);
    }

    const json& raw() const { return data_; }

private:
    template <typename T>
    T get(const std::string& key) {
        used_.insert(key);
        try {
            return data_.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError("config key has wrong type: " + key);
        }
    }

    json data_;
    std::set<std::string> used_;
};

std::uint64_t env_seed_fallback() {
    if (const char* s = std::getenv("IWSFT_SEED")) {
        try {
            return std::stoull(s);
        } catch (...) {
            throw ConfigError("IWSFT_SEED is not an integer");
        }
    }
    return 0;
}

void print_stats(const iwsft::TrajectoryDataset& ds) {
    const auto s = iwsft::dataset_stats(ds);
    std::cout << "count " << s.count << "\n"
              << "ret_min " << iwsft::format_double(s.ret_min) << "\n"
              << "ret_mean " << iwsft::format_double(s.ret_mean) << "\n"
              << "ret_max " << iwsft::format_double(s.ret_max) << "\n"
              << "p10 " << iwsft::format_double(s.p10) << "\n"
              << "p50 " << iwsft::format_double(s.p50) << "\n"
              << "p90 " << iwsft::format_double(s.p90) << "\n";
}

int cmd_generate(const std::string& env, std::size_t n, std::uint64_t seed, double noise,
                 const std::string& out_path) {
    iwsft::TrajectoryDataset ds;
    if (env == "bandit")
        ds = iwsft::generate_bandit_data({}, n, seed);
    else if (env == "chain")
        ds = iwsft::generate_chain_data(iwsft::default_chain_spec(), n, seed);
    else if (env == "pointmass")
        ds = iwsft::generate_pointmass_data(n, noise, seed);
    else
        throw ConfigError("unknown env: " + env);
    iwsft::save_dataset(ds, out_path);
    std::cout << "wrote " << out_path << "\n";
    print_stats(ds);
    return 0;
}

std::vector<double> parse_cutoffs(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stod(item));
        } catch (...) {
            throw ConfigError("bad cutoff value: " + item);
        }
    }
    if (out.empty()) throw ConfigError("no cutoffs given");
    return out;
}

int cmd_curate(const std::string& in_path, const std::string& out_path, bool has_threshold,
               double threshold, const std::string& cutoffs_csv) {
    auto source = std::make_shared<const iwsft::TrajectoryDataset>(iwsft::load_dataset(in_path));
    iwsft::CuratedDataset cd;
    if (has_threshold) {
        cd = iwsft::filter_binary(source, threshold);
    } else {
        cd = iwsft::curate_quality(source, parse_cutoffs(cutoffs_csv));
    }
    iwsft::save_curated(cd, out_path, in_path);

    const auto sizes = iwsft::bin_sizes(cd);
    for (std::size_t i = 0; i < sizes.size(); ++i)
        std::cout << "bin " << i << " threshold " << iwsft::format_double(cd.cutoffs[i]) << " size "
                  << sizes[i] << "\n";
    std::cout << "entries " << cd.entries.size() << " total_multiplicity " << cd.total_multiplicity()
              << "\n";
    if (source->action_space.kind == iwsft::ActionSpace::Kind::Discrete) {
        std::vector<std::size_t> counts(source->action_space.dim, 0);
        for (const auto& e : cd.entries)
            for (const auto& st : source->trajectories[e.index].steps)
                if (st.mask) ++counts[iwsft::discrete_action(st.action)];
        for (std::size_t a = 0; a < counts.size(); ++a)
            std::cout << "action " << a << " count " << counts[a] << "\n";
    }
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

iwsft::TrainMode parse_mode(const std::string& s) {
    if (s == "sft") return iwsft::TrainMode::Sft;
    if (s == "sft_q") return iwsft::TrainMode::SftQ;
    if (s == "iw_sft") return iwsft::TrainMode::IwSft;
    if (s == "iw_sft_q") return iwsft::TrainMode::IwSftQ;
    throw ConfigError("invalid config value for mode: " + s);
}

int cmd_train(const std::string& config_path, const std::string& out_dir_override) {
    const auto t_start = std::chrono::steady_clock::now();
    Config cfg(config_path);

    const auto mode = parse_mode(cfg.require<std::string>("mode"));
    const auto curated_path = cfg.require<std::string>("curated");
    const auto curated_file = iwsft::load_curated_file(curated_path);
    const auto dataset_path = cfg.optional<std::string>("dataset", curated_file.source_path);
    auto source = std::make_shared<const iwsft::TrajectoryDataset>(iwsft::load_dataset(dataset_path));
    const auto curated = iwsft::bind_curated(curated_file, source);

    iwsft::TrainConfig tc;
    tc.mode = mode;
    tc.batch_size = cfg.optional<int>("batch_size", 256);
    tc.total_steps = cfg.optional<long>("total_steps", 4500);
    tc.warmup_steps = cfg.optional<long>("warmup_steps", 300);
    tc.peak_lr = cfg.optional<double>("peak_lr", 4e-5);
    const auto opt = cfg.optional<std::string>("optimizer", std::string("adam"));
    if (opt == "adam")
        tc.optimizer = iwsft::OptimizerKind::Adam;
    else if (opt == "sgd")
        tc.optimizer = iwsft::OptimizerKind::Sgd;
    else
        throw ConfigError("invalid config value for optimizer: " + opt);
    tc.adam.beta1 = cfg.optional<double>("adam_beta1", 0.9);
    tc.adam.beta2 = cfg.optional<double>("adam_beta2", 0.95);
    tc.adam.eps = cfg.optional<double>("adam_eps", 1e-8);
    tc.adam.weight_decay = cfg.optional<double>("weight_decay", 1e-4);
    const auto qmode = cfg.optional<std::string>("q_update", std::string("ema"));
    if (qmode == "ema")
        tc.q_update = iwsft::QUpdateMode::Ema;
    else if (qmode == "periodic")
        tc.q_update = iwsft::QUpdateMode::Periodic;
    else
        throw ConfigError("invalid config value for q_update: " + qmode);
    tc.ema_alpha = cfg.optional<double>("ema_alpha", 0.99);
    tc.period = cfg.optional<long>("period", 100);
    const auto scheme = cfg.optional<std::string>("scheme", std::string("temperature"));
    if (scheme == "temperature")
        tc.weight_cfg.scheme = iwsft::WeightScheme::Temperature;
    else if (scheme == "per_step_clip")
        tc.weight_cfg.scheme = iwsft::WeightScheme::PerStepClip;
    else
        throw ConfigError("invalid config value for scheme: " + scheme);
    const auto kmode = cfg.optional<std::string>("k_mode", std::string("mean"));
    if (kmode == "fixed")
        tc.weight_cfg.k_mode = iwsft::KMode::Fixed;
    else if (kmode == "mean")
        tc.weight_cfg.k_mode = iwsft::KMode::MeanScale;
    else
        throw ConfigError("invalid config value for k_mode: " + kmode);
    tc.weight_cfg.k = cfg.optional<double>("k", 1.0);
    tc.weight_cfg.alpha_min = cfg.optional<double>("alpha_min", 0.2);
    tc.weight_cfg.alpha_max = cfg.optional<double>("alpha_max", 1.8);
    tc.weight_cfg.beta_min = cfg.optional<double>("beta_min", 1e-3);
    tc.weight_cfg.beta_max = cfg.optional<double>("beta_max", 1e3);
    tc.weight_cfg.normalize_batch = cfg.optional<bool>("normalize_batch", false);
    tc.seed = cfg.optional<std::uint64_t>("seed", env_seed_fallback());

    const auto hidden = cfg.optional<std::vector<int>>("hidden", {256, 256});
    iwsft::PolicyLayout layout = iwsft::default_layout(*source, hidden);

    iwsft::PolicyParams theta_ref;
    if (cfg.has("ref_checkpoint")) {
        theta_ref = iwsft::load_params(cfg.require<std::string>("ref_checkpoint"));
        if (theta_ref.layout.input_dim != source->state_dim)
            throw std::runtime_error("ref checkpoint layout does not match dataset");
    } else {
        const auto bc_steps = cfg.optional<long>("bc_steps", 10000);
        const auto bc_lr = cfg.optional<double>("bc_lr", 1e-3);
        const auto bc_batch = cfg.optional<int>("bc_batch", 32);
        theta_ref = iwsft::pretrain_bc(*source, layout, bc_steps, bc_lr, bc_batch, tc.seed);
    }

    const auto eval_env = cfg.optional<std::string>("eval_env", std::string());
    const auto eval_episodes = cfg.optional<std::size_t>("eval_episodes", 10000);

    std::string out_dir = cfg.optional<std::string>("out_dir", std::string("runs/latest"));
    if (!out_dir_override.empty()) out_dir = out_dir_override;
    cfg.finish();

    std::filesystem::create_directories(out_dir);
    const auto result = iwsft::train(curated, theta_ref, tc);

    iwsft::write_metrics_csv(result.metrics, out_dir + "/metrics.csv");
    iwsft::save_params(result.params, out_dir + "/final.ckpt");

    json summary;
    summary["config"] = cfg.raw();
    summary["aborted"] = result.aborted;
    if (result.aborted) summary["abort_reason"] = result.abort_reason;
    if (!result.metrics.empty()) summary["final_loss"] = result.metrics.back().loss;
    summary["steps_run"] = result.metrics.size();

    if (eval_env == "bandit") {
        const iwsft::BanditSpec spec;
        const auto mc = iwsft::mc_return(result.params, spec, eval_episodes, tc.seed + 1);
        const auto probs = iwsft::action_probs(result.params, iwsft::bandit_state());
        summary["mc_return_mean"] = mc.mean;
        summary["mc_return_stderr"] = mc.stderr_of_mean;
        summary["p_right"] = probs[1];
        summary["exact_j"] = iwsft::exact_j(result.params, spec);
    } else if (eval_env == "chain") {
        const auto spec = iwsft::default_chain_spec();
        const auto mc = iwsft::mc_return(result.params, spec, eval_episodes, tc.seed + 1);
        summary["mc_return_mean"] = mc.mean;
        summary["mc_return_stderr"] = mc.stderr_of_mean;
        summary["exact_j"] = iwsft::exact_j(result.params, spec);
    } else if (eval_env == "pointmass") {
        const iwsft::PointMassSpec spec;
        const auto mc = iwsft::mc_return(result.params, spec, eval_episodes, tc.seed + 1);
        summary["mc_return_mean"] = mc.mean;
        summary["mc_return_stderr"] = mc.stderr_of_mean;
    } else if (!eval_env.empty()) {
        throw ConfigError("invalid config value for eval_env: " + eval_env);
    }

    const auto t_end = std::chrono::steady_clock::now();
    summary["wall_time_s"] = std::chrono::duration<double>(t_end - t_start).count();
    std::ofstream sf(out_dir + "/summary.json");
    sf << summary.dump(2) << "\n";

    std::cout << "out_dir " << out_dir << "\n";
    if (!result.metrics.empty())
        std::cout << "final_loss " << iwsft::format_double(result.metrics.back().loss) << "\n";
    if (summary.contains("p_right"))
        std::cout << "p_right " << iwsft::format_double(summary["p_right"].get<double>()) << "\n";
    if (summary.contains("mc_return_mean"))
        std::cout << "mc_return_mean " << iwsft::format_double(summary["mc_return_mean"].get<double>())
                  << "\n";
    if (result.aborted) {
        std::cerr << "training aborted: " << result.abort_reason << "\n";
        return 2;
    }
    return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& env, std::size_t episodes,
             std::uint64_t seed, const std::string& out_csv, bool exact,
             const std::string& ref_ckpt_path) {
    const auto theta = iwsft::load_params(ckpt_path);
    std::vector<std::pair<std::string, double>> metrics;

    if (env == "bandit") {
        if (theta.layout.input_dim != 1 || theta.layout.head != iwsft::HeadKind::Categorical ||
            theta.layout.output_dim != 2)
            throw std::runtime_error("checkpoint layout does not match bandit env");
        const iwsft::BanditSpec spec;
        const auto mc = iwsft::mc_return(theta, spec, episodes, seed);
        metrics.emplace_back("mc_return_mean", mc.mean);
        metrics.emplace_back("mc_return_stderr", mc.stderr_of_mean);
        metrics.emplace_back("p_right", iwsft::action_probs(theta, iwsft::bandit_state())[1]);
        if (exact) metrics.emplace_back("exact_j", iwsft::exact_j(theta, spec));
        if (!ref_ckpt_path.empty()) {
            const auto ref = iwsft::load_params(ref_ckpt_path);
            metrics.emplace_back("sft_bound", iwsft::exact_bound(theta, ref, ref, spec));
            metrics.emplace_back("iw_bound", iwsft::exact_bound(theta, theta, ref, spec));
        }
    } else if (env == "chain") {
        const auto spec = iwsft::default_chain_spec();
        if (theta.layout.input_dim != spec.num_states ||
            theta.layout.head != iwsft::HeadKind::Categorical)
            throw std::runtime_error("checkpoint layout does not match chain env");
        const auto mc = iwsft::mc_return(theta, spec, episodes, seed);
        metrics.emplace_back("mc_return_mean", mc.mean);
        metrics.emplace_back("mc_return_stderr", mc.stderr_of_mean);
        if (exact) metrics.emplace_back("exact_j", iwsft::exact_j(theta, spec));
        if (!ref_ckpt_path.empty()) {
            const auto ref = iwsft::load_params(ref_ckpt_path);
            metrics.emplace_back("sft_bound", iwsft::exact_bound(theta, ref, ref, spec));
            metrics.emplace_back("iw_bound", iwsft::exact_bound(theta, theta, ref, spec));
        }
    } else if (env == "pointmass") {
        if (theta.layout.input_dim != 2 || theta.layout.head != iwsft::HeadKind::Gaussian)
            throw std::runtime_error("checkpoint layout does not match pointmass env");
        const iwsft::PointMassSpec spec;
        const auto mc = iwsft::mc_return(theta, spec, episodes, seed);
        metrics.emplace_back("mc_return_mean", mc.mean);
        metrics.emplace_back("mc_return_stderr", mc.stderr_of_mean);
    } else {
        throw ConfigError("unknown env: " + env);
    }

    for (const auto& [k, v] : metrics) std::cout << k << " " << iwsft::format_double(v) << "\n";
    if (!out_csv.empty()) {
        std::ofstream out(out_csv, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open for writing: " + out_csv);
        out << "metric,value\r\n";
        for (const auto& [k, v] : metrics) out << k << "," << iwsft::format_double(v) << "\r\n";
    }
    return 0;
}

int cmd_bound_sweep(std::size_t probes, std::uint64_t seed, double kl_radius,
                    const std::string& out_csv) {
    const auto spec = iwsft::default_chain_spec();
    const auto paths = iwsft::enumerate_trajectories(spec);
    iwsft::Rng rng(seed);
    const auto theta_ref = iwsft::random_params(iwsft::chain_layout(spec), rng, 0.5);

    std::ofstream out(out_csv, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + out_csv);
    out << "kl,exact_j,sft_bound,iw_bound\r\n";
    std::size_t violations = 0;
    for (std::size_t i = 0; i <= probes; ++i) {
        // first row probes theta = theta_ref itself (kl = 0)
        const double target = i == 0 ? 0.0 : rng.uniform() * kl_radius;
        const auto theta = iwsft::perturb_to_kl(theta_ref, paths, target, rng);
        const double kl = iwsft::trajectory_kl(theta, theta_ref, paths);
        const double j = iwsft::exact_j(theta, paths);
        const double sft = iwsft::exact_bound(theta, theta_ref, theta_ref, paths);
        const double iw = iwsft::exact_bound(theta, theta, theta_ref, paths);
        if (iw > j + 1e-10 || sft > iw + 1e-10) ++violations;
        out << iwsft::format_double(kl) << "," << iwsft::format_double(j) << ","
            << iwsft::format_double(sft) << "," << iwsft::format_double(iw) << "\r\n";
    }
    std::cout << "probes " << probes + 1 << " violations " << violations << " wrote " << out_csv
              << "\n";
    return violations == 0 ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SFT, SFT(Q) and importance-weighted SFT on curated trajectory data"};
    app.require_subcommand(1);

    // generate
    auto* gen = app.add_subcommand("generate", "Generate a synthetic dataset");
    std::string gen_env;
    std::size_t gen_n = 1000;
    std::uint64_t gen_seed = 0;
    double gen_noise = 0.3;
    std::string gen_out;
    gen->add_option("--env", gen_env, "bandit | chain | pointmass")->required();
    gen->add_option("--n", gen_n, "number of trajectories")->required();
    gen->add_option("--seed", gen_seed, "rng seed")->envname("IWSFT_SEED");
    gen->add_option("--noise", gen_noise, "pointmass controller noise");
    gen->add_option("--out", gen_out, "output dataset path")->required();

    // curate
    auto* cur = app.add_subcommand("curate", "Filter or quality-bin a dataset");
    std::string cur_in, cur_out, cur_cutoffs;
    double cur_threshold = 0.0;
    cur->add_option("--in", cur_in, "input dataset path")->required();
    cur->add_option("--out", cur_out, "output curated path")->required();
    auto* opt_thresh = cur->add_option("--threshold", cur_threshold, "binary filter: keep ret > threshold");
    auto* opt_cuts = cur->add_option("--cutoffs", cur_cutoffs, "percentile cutoffs, e.g. 90,95,98");
    opt_thresh->excludes(opt_cuts);

    // train
    auto* tr = app.add_subcommand("train", "Run a training config");
    std::string tr_config, tr_out_dir;
    tr->add_option("--config", tr_config, "JSON config path")->required();
    tr->add_option("--out-dir", tr_out_dir, "override the config out_dir");

    // eval
    auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint in an environment");
    std::string ev_ckpt, ev_env, ev_out, ev_ref;
    std::size_t ev_episodes = 0;
    std::uint64_t ev_seed = 0;
    bool ev_exact = false;
    ev->add_option("--checkpoint", ev_ckpt, "policy checkpoint")->required();
    ev->add_option("--env", ev_env, "bandit | chain | pointmass")->required();
    ev->add_option("--episodes", ev_episodes, "rollout count")->required();
    ev->add_option("--seed", ev_seed, "rng seed")->envname("IWSFT_SEED");
    ev->add_option("--out", ev_out, "also write metric,value CSV here");
    ev->add_flag("--exact", ev_exact, "also report the enumerated exact return");
    ev->add_option("--ref-checkpoint", ev_ref, "reference checkpoint; reports exact bounds");

    // bound-sweep
    auto* bs = app.add_subcommand("bound-sweep", "Exact bound chain over random policies");
    std::size_t bs_probes = 200;
    std::uint64_t bs_seed = 0;
    double bs_radius = 0.1;
    std::string bs_out;
    bs->add_option("--probes", bs_probes, "number of random probes");
    bs->add_option("--seed", bs_seed, "rng seed")->envname("IWSFT_SEED");
    bs->add_option("--kl-radius", bs_radius, "max trajectory KL from the reference");
    bs->add_option("--out", bs_out, "output CSV path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (gen->parsed()) return cmd_generate(gen_env, gen_n, gen_seed, gen_noise, gen_out);
        if (cur->parsed()) {
            if (opt_thresh->count() == 0 && opt_cuts->count() == 0)
                throw ConfigError("curate needs --threshold or --cutoffs");
            return cmd_curate(cur_in, cur_out, opt_thresh->count() > 0, cur_threshold, cur_cutoffs);
        }
        if (tr->parsed()) return cmd_train(tr_config, tr_out_dir);
        if (ev->parsed()) {
            if (ev_episodes == 0) throw ConfigError("eval needs --episodes >= 1");
            return cmd_eval(ev_ckpt, ev_env, ev_episodes, ev_seed, ev_out, ev_exact, ev_ref);
        }
        if (bs->parsed()) return cmd_bound_sweep(bs_probes, bs_seed, bs_radius, bs_out);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
