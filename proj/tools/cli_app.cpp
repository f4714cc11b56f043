#include "cli_app.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <zlib.h>

#include "centaur/analysis.hpp"
#include "centaur/baselines.hpp"
#include "centaur/embedding_store.hpp"
#include "centaur/error.hpp"
#include "centaur/model_selection.hpp"
#include "centaur/prompt.hpp"
#include "centaur/random.hpp"
#include "centaur/readout.hpp"
#include "centaur/synthetic.hpp"
#include "centaur/trial_io.hpp"

namespace centaur::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::vector<std::string> kSubcommands = {"prompts", "embed-synth", "fit",          "fit-re", "baseline", "simulate",
                                               "curves",  "indifference", "bms", "transfer", "report"};

// Keys whose string values (or arrays of strings) name input files.
const std::set<std::string> kPathKeys = {"trials",     "embeddings", "logprobs", "fit_report", "evidence",
                                         "mapping",    "path",       "reports",  "inputs"};

struct Flags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::optional<unsigned> threads;
    std::string kind;
    std::string evidence;
};

// A run: resolved config (embedded in artifacts), output directory and
// execution settings that do not influence results.
struct Run {
    std::string subcommand;
    json config;
    fs::path out;
    unsigned threads = 0;
    std::vector<fs::path> inputs;
    std::vector<std::pair<std::string, fs::path>> artifacts;
};

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + p.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void absolutize(json& node, const fs::path& base, bool is_path, std::vector<fs::path>& inputs) {
    if (node.is_string() && is_path) {
        fs::path p = node.get<std::string>();
        if (p.is_relative()) p = base / p;
        p = p.lexically_normal();
        if (!fs::exists(p)) throw ConfigError("input file not found: " + p.string());
        inputs.push_back(p);
        node = p.string();
    } else if (node.is_array()) {
        for (auto& v : node) absolutize(v, base, is_path, inputs);
    } else if (node.is_object()) {
        for (auto it = node.begin(); it != node.end(); ++it) absolutize(it.value(), base, kPathKeys.count(it.key()) != 0, inputs);
    }
}

json default_config(const std::string& sub) {
    json c = {{"folds", {{"count", 100}, {"fractions", {0.90, 0.09, 0.01}}}},
              {"alpha_grid", default_alpha_grid()},
              {"temperature_grid", default_temperature_grid()},
              {"penalty_scale", "per_choice"},
              {"scaler", "per_fold"}};
    if (sub == "prompts") c["prompts"] = {{"spell_horizon_words", true}};
    if (sub == "embed-synth")
        c["synth"] = {{"paradigm", "description"}, {"count", 1000},         {"dim", 64},
                      {"generator", "linear_latent"}, {"weight_scale", 1.0}, {"noise_sd", 0.0},
                      {"participants", 0},            {"hybrid_beta", {0.5, 0.3, 0.2}}};
    if (sub == "baseline")
        c["baseline"] = {{"kind", "random"},
                         {"horizon_specific", false},
                         {"priors", {{"prior_mean", 50.0}, {"prior_variance", 100.0}, {"noise_variance", 64.0}}}};
    if (sub == "simulate") c["simulate"] = {{"mode", "sample"}};
    if (sub == "bms") c["bms"] = {{"samples", 1000000}, {"prior", 1.0}, {"tolerance", 1e-6}, {"max_iterations", 1000}};
    if (sub == "transfer") c["transfer"] = {{"holdout_folds", 8}};
    return c;
}

Run resolve(const std::string& sub, const Flags& flags) {
    const fs::path config_path = fs::absolute(flags.config);
    json raw;
    try {
        raw = json::parse(read_file(config_path));
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + config_path.string() + " is not valid JSON: " + e.what());
    }
    if (!raw.is_object()) throw ConfigError("config must be a JSON object");

    Run run;
    run.subcommand = sub;
    // A manifest or JSON artifact can be passed back in: use its embedded config.
    if (raw.contains("config") && raw["config"].is_object()) {
        if (raw.contains("subcommand") && raw["subcommand"] != sub)
            throw ConfigError("artifact was produced by '" + raw["subcommand"].get<std::string>() + "', not '" + sub + "'");
        raw = raw["config"];
    }

    json cfg = default_config(sub);
    cfg.merge_patch(raw);
    if (flags.seed) cfg["seed"] = *flags.seed;
    if (!flags.kind.empty()) cfg["baseline"]["kind"] = flags.kind;
    if (!flags.evidence.empty()) cfg["bms"]["evidence"] = fs::absolute(flags.evidence).string();
    if (!cfg.contains("seed") || !cfg["seed"].is_number_unsigned())
        throw ConfigError("config needs a non-negative integer 'seed'");

    std::string out = flags.out;
    if (out.empty() && cfg.contains("out")) {
        fs::path p = cfg["out"].get<std::string>();
        out = (p.is_relative() ? config_path.parent_path() / p : p).string();
    }
    if (out.empty()) throw ConfigError("no output directory (use --out or the 'out' config key)");
    run.out = fs::absolute(out).lexically_normal();
    run.threads = flags.threads ? *flags.threads : cfg.value("threads", 0u);
    // Execution details stay out of the embedded config so reruns elsewhere match.
    cfg.erase("out");
    cfg.erase("threads");

    absolutize(cfg, config_path.parent_path(), false, run.inputs);
    for (const char* grid : {"alpha_grid", "temperature_grid"}) {
        if (!cfg[grid].is_array() || cfg[grid].empty()) throw ConfigError(std::string(grid) + " must be a non-empty list");
    }
    run.config = std::move(cfg);
    return run;
}

fs::path artifact(Run& run, const std::string& name) {
    const fs::path p = run.out / name;
    for (const auto& in : run.inputs)
        if (fs::weakly_canonical(in) == fs::weakly_canonical(p))
            throw ConfigError("output " + p.string() + " would overwrite an input");
    run.artifacts.emplace_back(name, p);
    return p;
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + p.string());
    out << text;
    if (!out) throw ConfigError("write failed for " + p.string());
}

void write_json_artifact(Run& run, const std::string& name, json body) {
    body["subcommand"] = run.subcommand;
    body["config"] = run.config;
    write_text(artifact(run, name), body.dump(2) + "\n");
}

std::string num(double v) {
    if (std::isnan(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_manifest(Run& run) {
    json list = json::array();
    for (const auto& [name, path] : run.artifacts) {
        const std::string bytes = read_file(path);
        const auto crc = crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
        list.push_back({{"name", name}, {"bytes", bytes.size()}, {"crc32", crc}});
    }
    json m = {{"subcommand", run.subcommand}, {"config", run.config}, {"artifacts", list}};
    const fs::path p = run.out / "manifest.json";
    write_text(p, m.dump(2) + "\n");
}

std::uint64_t seed_of(const Run& run) { return run.config["seed"].get<std::uint64_t>(); }

// Independent stream per purpose, derived from the master seed.
std::uint64_t derived_seed(const Run& run, std::uint64_t salt) {
    std::uint64_t z = seed_of(run) + 0x9E3779B97F4A7C15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::vector<ChoiceTrial> load_trials_from(const json& section, bool validate = true) {
    std::vector<ChoiceTrial> trials;
    if (section.contains("trials")) {
        trials = read_trials(section["trials"].get<std::string>());
    } else if (section.contains("trials_csv")) {
        const auto& t = section["trials_csv"];
        trials = read_delimited(t.at("path").get<std::string>(), read_column_mapping(t.at("mapping").get<std::string>()));
    } else {
        throw ConfigError("config needs 'trials' (JSON lines) or 'trials_csv' ({path, mapping})");
    }
    if (validate) {
        const auto report = validate_dataset(trials);
        if (!report.ok()) {
            std::string msg = std::to_string(report.violations.size()) + " dataset violation(s):";
            for (std::size_t i = 0; i < std::min<std::size_t>(report.violations.size(), 10); ++i)
                msg += "\n  " + report.violations[i].trial_id + ": " + report.violations[i].message;
            throw DataError(msg);
        }
    }
    return trials;
}

EmbeddingStore load_store_from(const json& section) {
    if (!section.contains("embeddings")) throw ConfigError("config needs 'embeddings'");
    return read_store(section["embeddings"].get<std::string>());
}

FoldPlan plan_for(const Run& run, std::span<const ChoiceTrial> trials) {
    const auto& f = run.config["folds"];
    const auto fr = f.at("fractions").get<std::vector<double>>();
    if (fr.size() != 3) throw ConfigError("folds.fractions needs three values (train, validation, test)");
    const std::uint64_t seed = f.contains("seed") ? f["seed"].get<std::uint64_t>() : seed_of(run);
    return make_fold_plan(trial_ids(trials), f.at("count").get<std::size_t>(), {fr[0], fr[1], fr[2]}, seed);
}

FitOptions fit_options(const Run& run) {
    FitOptions o;
    o.penalty_scale = parse_penalty_scale(run.config["penalty_scale"].get<std::string>());
    return o;
}

CvOptions cv_options(const Run& run, const std::string& model) {
    CvOptions o;
    o.alpha_grid = run.config["alpha_grid"].get<std::vector<double>>();
    o.scaler = parse_scaler_mode(run.config["scaler"].get<std::string>());
    o.fit = fit_options(run);
    o.threads = run.threads;
    o.model_name = model;
    return o;
}

KalmanPriors priors_from(const json& j) {
    KalmanPriors p;
    p.prior_mean = j.value("prior_mean", p.prior_mean);
    p.prior_variance = j.value("prior_variance", p.prior_variance);
    p.noise_variance = j.value("noise_variance", p.noise_variance);
    return p;
}

void summarize(std::ostream& out, const FitReport& r) {
    out << r.model << ": aggregate test NLL " << num(r.aggregate_test_nll) << " over " << r.folds.size() << " folds ("
        << num(r.choice_count) << " choices)\n";
}

// ---------------------------------------------------------------- subcommands

void cmd_prompts(Run& run, std::ostream& out) {
    const auto trials = load_trials_from(run.config, false);
    RenderOptions opts;
    opts.spell_horizon_words = run.config["prompts"].value("spell_horizon_words", true);
    std::string body;
    for (const auto& t : trials) body += json{{"trial_id", t.trial_id}, {"prompt", render_prompt(t, opts).text}}.dump() + "\n";
    write_text(artifact(run, "prompts.jsonl"), body);
    out << "rendered " << trials.size() << " prompts\n";
}

void cmd_embed_synth(Run& run, std::ostream& out) {
    const auto& s = run.config["synth"];
    const auto paradigm = s.at("paradigm").get<std::string>();
    const auto count = s.at("count").get<std::size_t>();
    const auto dim = s.at("dim").get<std::uint32_t>();
    if (dim == 0) throw ConfigError("synth.dim must be at least 1");
    const auto participants = s.value("participants", std::size_t{0});

    std::vector<ChoiceTrial> trials;
    std::optional<std::vector<double>> truth;
    EmbeddingStore store;
    json summary;

    if (paradigm == "description") {
        std::vector<std::string> ids;
        for (std::size_t i = 0; i < count; ++i) ids.push_back("d" + std::to_string(i));
        const auto gen_name = s.at("generator").get<std::string>();
        SynthGenerator gen = GaussianNoise{};
        if (gen_name == "linear_latent") {
            LinearLatent ll;
            Rng wr(derived_seed(run, 1));
            const double scale = s.value("weight_scale", 1.0) / std::sqrt(static_cast<double>(dim));
            for (std::uint32_t j = 0; j < dim; ++j) ll.weights.push_back(scale * wr.normal());
            ll.noise_sd = s.value("noise_sd", 0.0);
            gen = ll;
        } else if (gen_name != "gaussian_noise") {
            throw ConfigError("synth.generator must be linear_latent or gaussian_noise");
        }
        auto res = synth_embeddings(ids, dim, derived_seed(run, 2), gen);
        store = std::move(res.store);
        std::vector<double> p = res.true_probabilities ? *res.true_probabilities : std::vector<double>(count, 0.5);
        std::vector<std::string> who;
        for (std::size_t i = 0; participants > 0 && i < count; ++i) who.push_back("p" + std::to_string(i % participants));
        trials = labelled_trials(ids, p, derived_seed(run, 3), who);
        truth = p;
    } else if (paradigm == "horizon") {
        HorizonTaskSpec spec;
        spec.games = count;
        spec.seed = derived_seed(run, 4);
        const auto beta = s.at("hybrid_beta").get<std::vector<double>>();
        if (beta.size() != 3) throw ConfigError("synth.hybrid_beta needs three values");
        trials = simulate_horizon_task(spec, [&](const HorizonState& st) {
            const auto r = hybrid_regressors(st);
            return sigmoid(beta[0] * r.value_difference + beta[1] * r.relative_uncertainty + beta[2] * r.scaled_value);
        });
        for (std::size_t i = 0; participants > 0 && i < trials.size(); ++i)
            trials[i].participant_id = "p" + std::to_string(i % participants);
        store = synth_embeddings(trial_ids(trials), dim, derived_seed(run, 5), GaussianNoise{}).store;
    } else if (paradigm == "experiential_symbolic") {
        EsTaskSpec spec;
        spec.trials = count;
        spec.seed = derived_seed(run, 6);
        const double bias = s.value("s_bias", 0.0);
        trials = simulate_es_task(spec, [&](const ExperientialSymbolicTrial& e) {
            return sigmoid(10.0 * (e.e_win_probability - e.s_win_probability - bias));
        });
        store = synth_embeddings(trial_ids(trials), dim, derived_seed(run, 7), GaussianNoise{}).store;
    } else {
        throw ConfigError("synth.paradigm must be description, horizon or experiential_symbolic");
    }
    store.set_provenance("synthetic:" + paradigm + ":seed=" + std::to_string(seed_of(run)));

    // Option log-probabilities for the log-prob baseline: a tempered view of
    // the true probabilities, with 10% mass left to other tokens.
    std::string lp;
    for (std::size_t i = 0; i < trials.size(); ++i) {
        const double p = truth ? (*truth)[i] : 0.5;
        const double z = 0.5 * std::log(std::clamp(p, 1e-12, 1 - 1e-12) / std::clamp(1 - p, 1e-12, 1 - 1e-12));
        const double q = sigmoid(z);
        lp += json{{"trial_id", trials[i].trial_id}, {"logp_1", std::log(0.9 * q)}, {"logp_2", std::log(0.9 * (1 - q))}}.dump() + "\n";
    }

    write_store(store, artifact(run, "embeddings.cntr"));
    write_trials(artifact(run, "trials.jsonl"), trials);
    write_text(artifact(run, "logprobs.jsonl"), lp);
    if (truth) {
        double entropy = 0.0;
        std::string csv = "trial_id,probability\n";
        for (std::size_t i = 0; i < trials.size(); ++i) {
            const double p = (*truth)[i];
            if (p > 0 && p < 1) entropy -= p * std::log(p) + (1 - p) * std::log1p(-p);
            csv += trials[i].trial_id + "," + num(p) + "\n";
        }
        write_text(artifact(run, "true_probabilities.csv"), csv);
        summary["generator_entropy"] = entropy;
    }
    summary["trials"] = trials.size();
    summary["dim"] = dim;
    write_json_artifact(run, "synth.json", summary);
    out << "wrote " << trials.size() << " " << paradigm << " trials, dim " << dim << "\n";
}

void write_fit_report(Run& run, const FitReport& report, json extra = json::object()) {
    json body = report_to_json(report);
    for (auto it = extra.begin(); it != extra.end(); ++it) body[it.key()] = it.value();
    write_json_artifact(run, "fit_report.json", body);
}

void cmd_fit(Run& run, std::ostream& out, bool random_effects) {
    const auto trials = load_trials_from(run.config);
    const auto store = load_store_from(run.config);
    const auto plan = plan_for(run, trials);
    const auto report = random_effects ? fit_random_effects(store, trials, plan, cv_options(run, "centaur-re"))
                                       : nested_cv_fit(store, trials, plan, cv_options(run, "centaur"));
    write_fit_report(run, report);
    summarize(out, report);
}

FitReport random_report(std::span<const ChoiceTrial> trials, const FoldPlan& plan) {
    FitReport r;
    r.model = "random";
    for (std::size_t f = 0; f < plan.fold_count(); ++f) {
        FoldRecord rec;
        rec.fold = f;
        for (auto i : plan.folds[f].train) rec.train_nll += trials[i].repeat_count * std::numbers::ln2;
        for (auto i : plan.folds[f].validation) rec.validation_nll += trials[i].repeat_count * std::numbers::ln2;
        std::vector<ChoiceTrial> test;
        for (auto i : plan.folds[f].test) {
            test.push_back(trials[i]);
            r.predictions.push_back({trials[i].trial_id, f, 0.5});
            if (trials[i].participant_id)
                r.participant_test_nll[*trials[i].participant_id] += trials[i].repeat_count * std::numbers::ln2;
        }
        rec.test_nll = random_baseline_nll(test);
        rec.test_size = test.size();
        r.choice_count += rec.test_nll / std::numbers::ln2;
        r.aggregate_test_nll += rec.test_nll;
        r.folds.push_back(rec);
    }
    return r;
}

void cmd_baseline(Run& run, std::ostream& out) {
    const auto& b = run.config["baseline"];
    const auto kind = b.at("kind").get<std::string>();
    const auto trials = load_trials_from(run.config);
    const auto plan = plan_for(run, trials);
    if (kind == "random") {
        const auto r = random_report(trials, plan);
        write_fit_report(run, r);
        summarize(out, r);
    } else if (kind == "logprob") {
        if (!b.contains("logprobs")) throw ConfigError("baseline.logprobs is required for kind logprob");
        const auto table = read_logprobs(b["logprobs"].get<std::string>());
        const auto grid = run.config["temperature_grid"].get<std::vector<double>>();
        const auto r = fit_logprob_baseline(table, trials, plan, grid);
        write_fit_report(run, r.report, {{"selected_inverse_temperature", r.inverse_temperature}});
        summarize(out, r.report);
    } else if (kind == "hybrid") {
        HybridOptions o;
        o.priors = priors_from(b.at("priors"));
        o.horizon_specific = b.value("horizon_specific", false);
        o.threads = run.threads;
        const auto r = fit_hybrid(trials, plan, o);
        const auto whole = fit_hybrid_coefficients(trials, o);
        json coef = json::array(), se = json::array();
        for (Eigen::Index k = 0; k < whole.coefficients.size(); ++k) {
            coef.push_back(whole.coefficients(k));
            se.push_back(whole.standard_errors(k));
        }
        write_fit_report(run, r, {{"full_data_coefficients", coef}, {"full_data_standard_errors", se}});
        summarize(out, r);
    } else {
        throw ConfigError("baseline.kind must be random, logprob or hybrid");
    }
}

void cmd_simulate(Run& run, std::ostream& out) {
    const auto& s = run.config["simulate"];
    if (!s.contains("fit_report")) throw ConfigError("simulate.fit_report is required");
    const auto report = report_from_json(json::parse(read_file(s["fit_report"].get<std::string>())));
    const auto trials = load_trials_from(run.config, false);
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < trials.size(); ++i) index[trials[i].trial_id] = i;

    std::vector<ChoiceTrial> subset;
    std::vector<double> p;
    std::vector<std::size_t> folds;
    for (const auto& pred : report.predictions) {
        auto it = index.find(pred.trial_id);
        if (it == index.end()) throw DataError("prediction for unknown trial '" + pred.trial_id + "'");
        subset.push_back(trials[it->second]);
        p.push_back(pred.probability);
        folds.push_back(pred.fold);
    }
    if (subset.empty()) throw ConfigError("the fit report has no predictions");

    const auto mode_name = s.at("mode").get<std::string>();
    SimulationSpec spec;
    spec.seed = derived_seed(run, 20);
    if (mode_name == "sample") spec.mode = SimulationMode::Sample;
    else if (mode_name == "median_threshold") spec.mode = SimulationMode::MedianThreshold;
    else throw ConfigError("simulate.mode must be sample or median_threshold");

    const auto choices = simulate_choices_grouped(p, folds, spec);
    const KalmanPriors priors = s.contains("priors") ? priors_from(s["priors"]) : KalmanPriors{};
    const auto model = compute_regret(subset, choices, priors);
    const auto human = compute_regret(subset, human_choices(subset), priors);

    std::string csv = "trial_id,fold,probability,choice,regret,human_choice,human_regret\n";
    std::vector<ChoiceTrial> simulated;
    for (std::size_t i = 0; i < subset.size(); ++i) {
        csv += subset[i].trial_id + "," + std::to_string(folds[i]) + "," + num(p[i]) + "," + std::to_string(choices[i]) +
               "," + num(model.per_trial[i]) + "," + std::to_string(subset[i].human_choice) + "," +
               num(human.per_trial[i]) + "\n";
        ChoiceTrial t = subset[i];
        t.human_choice = choices[i];
        t.repeat_count = 1;
        t.choice_count_1 = choices[i] == 1 ? 1 : 0;
        simulated.push_back(std::move(t));
    }
    write_text(artifact(run, "regret.csv"), csv);
    write_trials(artifact(run, "simulated_trials.jsonl"), simulated);
    write_json_artifact(run, "simulate.json",
                        {{"mode", mode_name},
                         {"trials", subset.size()},
                         {"model_regret", {{"mean", model.mean}, {"standard_error", model.standard_error}}},
                         {"human_regret", {{"mean", human.mean}, {"standard_error", human.standard_error}}},
                         {"approximate_count", model.approximate_count}});
    out << "simulated " << subset.size() << " choices (" << mode_name << "); mean regret " << num(model.mean)
        << " vs human " << num(human.mean) << "\n";
}

void cmd_curves(Run& run, std::ostream& out) {
    const auto trials = load_trials_from(run.config, false);
    const auto choices = human_choices(trials);
    static const char* kTerms[4] = {"intercept", "reward_difference", "horizon", "interaction"};
    std::string csv = "condition,term,estimate,standard_error,trials,converged,separated,degenerate\n";
    json fits = json::array();
    for (auto cond : {InfoCondition::EqualInfo, InfoCondition::UnequalInfo}) {
        const auto f = fit_choice_curve(trials, choices, cond);
        json entry = {{"condition", to_string(cond)}, {"trials", f.trial_count},      {"converged", f.converged},
                      {"separated", f.separated},     {"degenerate", f.degenerate}};
        for (std::size_t k = 0; k < 4; ++k) {
            csv += to_string(cond) + "," + kTerms[k] + "," + num(f.coefficients[k]) + "," + num(f.standard_errors[k]) +
                   "," + std::to_string(f.trial_count) + "," + (f.converged ? "1" : "0") + "," +
                   (f.separated ? "1" : "0") + "," + (f.degenerate ? "1" : "0") + "\n";
            entry["coefficients"][kTerms[k]] = f.coefficients[k];
            entry["standard_errors"][kTerms[k]] = std::isnan(f.standard_errors[k]) ? json(nullptr) : json(f.standard_errors[k]);
        }
        fits.push_back(entry);
    }
    const auto rates = informative_choice_rate(trials, choices);
    auto cell = [](const RateCell& c) {
        return json{{"rate", c.rate}, {"standard_error", c.standard_error}, {"trials", c.count}, {"empty", c.empty}};
    };
    write_text(artifact(run, "curves.csv"), csv);
    write_json_artifact(run, "curves.json",
                        {{"fits", fits},
                         {"informative_choice_rate",
                          {{"horizon_1", cell(rates.horizon1)},
                           {"horizon_6", cell(rates.horizon6)},
                           {"difference", rates.difference},
                           {"difference_standard_error", rates.difference_standard_error}}}});
    out << "fitted choice curves on " << trials.size() << " trials\n";
}

void cmd_indifference(Run& run, std::ostream& out) {
    const auto trials = load_trials_from(run.config, false);
    const auto points = indifference_points(trials, human_choices(trials));
    std::string csv = "e_win_probability,s_star,intercept,slope,slope_at_parity,trials,censored,unidentifiable,separated\n";
    json list = json::array();
    for (const auto& pt : points) {
        csv += num(pt.e_win_probability) + "," + (pt.s_star ? num(*pt.s_star) : "") + "," + num(pt.intercept) + "," +
               num(pt.slope) + "," + num(pt.slope_at_parity) + "," + std::to_string(pt.trial_count) + "," +
               (pt.censored ? "1" : "0") + "," + (pt.unidentifiable ? "1" : "0") + "," + (pt.separated ? "1" : "0") + "\n";
        list.push_back({{"e_win_probability", pt.e_win_probability},
                        {"s_star", pt.s_star ? json(*pt.s_star) : json(nullptr)},
                        {"intercept", pt.intercept},
                        {"slope", pt.slope},
                        {"slope_at_parity", pt.slope_at_parity},
                        {"trials", pt.trial_count},
                        {"censored", pt.censored},
                        {"unidentifiable", pt.unidentifiable},
                        {"separated", pt.separated}});
    }
    write_text(artifact(run, "indifference.csv"), csv);
    write_json_artifact(run, "indifference.json", {{"points", list}});
    out << "estimated " << points.size() << " indifference points\n";
}

EvidenceMatrix evidence_from_reports(const std::vector<std::string>& paths) {
    std::vector<FitReport> reports;
    for (const auto& p : paths) reports.push_back(report_from_json(json::parse(read_file(p))));
    std::vector<std::string> common;
    for (const auto& [pid, nll] : reports.front().participant_test_nll) {
        bool everywhere = true;
        for (const auto& r : reports) everywhere = everywhere && r.participant_test_nll.count(pid);
        if (everywhere) common.push_back(pid);
    }
    if (common.empty()) throw DataError("the fit reports share no participants");
    EvidenceMatrix e;
    e.participant_ids = common;
    e.log_evidence.resize(static_cast<Eigen::Index>(common.size()), static_cast<Eigen::Index>(reports.size()));
    for (std::size_t k = 0; k < reports.size(); ++k) {
        e.model_names.push_back(reports[k].model);
        for (std::size_t n = 0; n < common.size(); ++n)
            e.log_evidence(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k)) =
                -reports[k].participant_test_nll.at(common[n]);
    }
    return e;
}

json to_json_vector(const Eigen::VectorXd& v) {
    json a = json::array();
    for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(v(k));
    return a;
}

void cmd_bms(Run& run, std::ostream& out) {
    const auto& b = run.config["bms"];
    EvidenceMatrix evidence;
    if (b.contains("evidence")) evidence = read_evidence_csv(b["evidence"].get<std::string>());
    else if (b.contains("reports")) evidence = evidence_from_reports(b["reports"].get<std::vector<std::string>>());
    else throw ConfigError("bms needs 'evidence' (CSV of participant x model NLLs) or 'reports' (fit reports)");

    BmsOptions o;
    o.prior_alpha = b.at("prior").get<double>();
    o.tolerance = b.at("tolerance").get<double>();
    o.max_iterations = b.at("max_iterations").get<int>();
    const auto r = random_effects_bms(evidence, b.at("samples").get<std::uint64_t>(), derived_seed(run, 30), o);
    const auto table = best_model_table(evidence);

    std::string csv = "participant,best_model";
    for (const auto& m : evidence.model_names) csv += ",delta_" + m;
    csv += "\n";
    for (Eigen::Index n = 0; n < table.delta.rows(); ++n) {
        csv += evidence.participant_ids[static_cast<std::size_t>(n)] + "," +
               evidence.model_names[table.best_model[static_cast<std::size_t>(n)]];
        for (Eigen::Index k = 0; k < table.delta.cols(); ++k) {
            const double d = table.delta(n, k);
            csv += "," + (d > table.display_cap ? ">" + num(table.display_cap) : num(d));
        }
        csv += "\n";
    }
    json wins = json::object();
    for (std::size_t k = 0; k < evidence.model_names.size(); ++k) wins[evidence.model_names[k]] = table.wins[k];
    write_json_artifact(run, "bms.json",
                        {{"models", evidence.model_names},
                         {"participants", evidence.participant_ids.size()},
                         {"dirichlet_alpha", to_json_vector(r.dirichlet_alpha)},
                         {"expected_frequencies", to_json_vector(r.expected_frequencies)},
                         {"exceedance_probabilities", to_json_vector(r.exceedance)},
                         {"protected_exceedance", to_json_vector(r.protected_exceedance)},
                         {"bayes_omnibus_risk", r.bayes_omnibus_risk},
                         {"free_energy", r.free_energy},
                         {"null_free_energy", r.null_free_energy},
                         {"iterations", r.iterations},
                         {"converged", r.converged},
                         {"best_model_counts", wins}});
    write_text(artifact(run, "best_model.csv"), csv);
    out << "model selection over " << evidence.model_names.size() << " models, " << evidence.participant_ids.size()
        << " participants; BOR " << num(r.bayes_omnibus_risk) << "\n";
}

void cmd_transfer(Run& run, std::ostream& out) {
    const auto& t = run.config["transfer"];
    if (!t.contains("train") || !t["train"].is_array() || t["train"].empty())
        throw ConfigError("transfer.train must list at least one task");
    if (!t.contains("holdout")) throw ConfigError("transfer.holdout is required");
    std::vector<std::vector<ChoiceTrial>> train_trials;
    std::vector<EmbeddingStore> train_stores;
    for (const auto& task : t["train"]) {
        train_trials.push_back(load_trials_from(task));
        train_stores.push_back(load_store_from(task));
    }
    const auto hold_trials = load_trials_from(t["holdout"]);
    const auto hold_store = load_store_from(t["holdout"]);
    std::vector<TaskData> tasks;
    for (std::size_t k = 0; k < train_trials.size(); ++k) tasks.push_back({&train_stores[k], train_trials[k]});

    TransferOptions o;
    o.holdout_folds = t.at("holdout_folds").get<std::size_t>();
    o.seed = derived_seed(run, 40);
    o.alpha_grid = run.config["alpha_grid"].get<std::vector<double>>();
    o.temperature_grid = run.config["temperature_grid"].get<std::vector<double>>();
    o.fit = fit_options(run);
    o.threads = run.threads;
    const auto r = transfer_fit(tasks, {&hold_store, hold_trials}, o);
    write_fit_report(run, r, {{"random_baseline_nll", random_baseline_nll(hold_trials)}});
    summarize(out, r);
}

void cmd_report(Run& run, std::ostream& out) {
    const auto& r = run.config.value("report", json::object());
    if (!r.contains("inputs") || r["inputs"].empty()) throw ConfigError("report.inputs must list fit reports");
    struct Row {
        std::string model, source;
        double nll, choices;
    };
    std::vector<Row> rows;
    for (const auto& p : r["inputs"]) {
        const auto rep = report_from_json(json::parse(read_file(p.get<std::string>())));
        rows.push_back({rep.model, p.get<std::string>(), rep.aggregate_test_nll, rep.choice_count});
    }
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        return a.nll != b.nll ? a.nll < b.nll : a.model < b.model;
    });
    std::string csv = "rank,model,aggregate_test_nll,choice_count,nll_per_choice,source\n";
    json list = json::array();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double per = rows[i].choices > 0 ? rows[i].nll / rows[i].choices : std::nan("");
        csv += std::to_string(i + 1) + "," + rows[i].model + "," + num(rows[i].nll) + "," + num(rows[i].choices) + "," +
               num(per) + "," + rows[i].source + "\n";
        list.push_back({{"rank", i + 1},
                        {"model", rows[i].model},
                        {"aggregate_test_nll", rows[i].nll},
                        {"choice_count", rows[i].choices},
                        {"source", rows[i].source}});
        out << i + 1 << ". " << rows[i].model << "  " << num(rows[i].nll) << "\n";
    }
    write_text(artifact(run, "report.csv"), csv);
    write_json_artifact(run, "report.json", {{"rows", list}});
}

void dispatch(Run& run, std::ostream& out) {
    fs::create_directories(run.out);
    const auto& s = run.subcommand;
    if (s == "prompts") cmd_prompts(run, out);
    else if (s == "embed-synth") cmd_embed_synth(run, out);
    else if (s == "fit") cmd_fit(run, out, false);
    else if (s == "fit-re") cmd_fit(run, out, true);
    else if (s == "baseline") cmd_baseline(run, out);
    else if (s == "simulate") cmd_simulate(run, out);
    else if (s == "curves") cmd_curves(run, out);
    else if (s == "indifference") cmd_indifference(run, out);
    else if (s == "bms") cmd_bms(run, out);
    else if (s == "transfer") cmd_transfer(run, out);
    else if (s == "report") cmd_report(run, out);
    write_manifest(run);
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"centaur: language-model embeddings to human choice models"};
    app.require_subcommand(1);
    Flags flags;
    std::uint64_t seed = 0;
    unsigned threads = 0;
    for (const auto& name : kSubcommands) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", flags.config, "JSON run config (or an artifact/manifest to re-run)")->required();
        sub->add_option("--seed", seed, "override the config seed");
        sub->add_option("--out", flags.out, "output directory");
        sub->add_option("--threads", threads, "worker threads (0 = all cores)");
        if (name == "baseline")
            sub->add_option("--kind", flags.kind, "random, logprob or hybrid")->check(CLI::IsMember({"random", "logprob", "hybrid"}));
        if (name == "bms") sub->add_option("--evidence", flags.evidence, "CSV of participant x model NLLs");
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n" << app.help();
        return kUsage;
    }

    const auto chosen = app.get_subcommands().front();
    if (chosen->count("--seed")) flags.seed = seed;
    if (chosen->count("--threads")) flags.threads = threads;

    try {
        Run r = resolve(chosen->get_name(), flags);
        dispatch(r, out);
        return kOk;
    } catch (const OptimizerError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return kNumerical;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kValidation;
    } catch (const json::exception& e) {
        err << "config error: " << e.what() << "\n";
        return kValidation;
    } catch (const fs::filesystem_error& e) {
        err << "file error: " << e.what() << "\n";
        return kValidation;
    }
}

DeterminismOutcome determinism_check(const fs::path& root) {
    fs::remove_all(root);
    fs::create_directories(root);
    DeterminismOutcome outcome;
    std::ostringstream sink;

    auto write_config = [&](const std::string& name, const json& cfg) {
        const fs::path p = root / (name + ".json");
        write_text(p, cfg.dump(2));
        return p;
    };
    auto invoke = [&](std::vector<std::string> args) {
        const int code = run(args, sink, sink);
        if (code != kOk) outcome.failures.push_back("exit " + std::to_string(code) + ": " + args[0]);
        return code;
    };

    const json folds = {{"count", 10}, {"fractions", {0.8, 0.1, 0.1}}};
    const json small_grid = {0.0, 0.01, 0.1, 1.0};
    struct Step {
        std::string sub, name;
        json cfg;
    };
    std::vector<Step> steps = {
        {"embed-synth", "desc",
         {{"seed", 1}, {"synth", {{"paradigm", "description"}, {"count", 300}, {"dim", 8}, {"participants", 3}}}}},
        {"embed-synth", "desc_b", {{"seed", 2}, {"synth", {{"paradigm", "description"}, {"count", 200}, {"dim", 8}}}}},
        {"embed-synth", "desc_c", {{"seed", 3}, {"synth", {{"paradigm", "description"}, {"count", 160}, {"dim", 8}}}}},
        {"embed-synth", "horizon", {{"seed", 4}, {"synth", {{"paradigm", "horizon"}, {"count", 150}, {"dim", 8}}}}},
        {"embed-synth", "es",
         {{"seed", 5}, {"synth", {{"paradigm", "experiential_symbolic"}, {"count", 900}, {"dim", 8}}}}},
        {"prompts", "prompts", {{"seed", 6}, {"trials", "desc/trials.jsonl"}}},
        {"fit", "fit",
         {{"seed", 7}, {"trials", "desc/trials.jsonl"}, {"embeddings", "desc/embeddings.cntr"}, {"folds", folds},
          {"alpha_grid", small_grid}}},
        {"fit-re", "fit_re",
         {{"seed", 7}, {"trials", "desc/trials.jsonl"}, {"embeddings", "desc/embeddings.cntr"}, {"folds", folds},
          {"alpha_grid", small_grid}}},
        {"baseline", "random", {{"seed", 7}, {"trials", "desc/trials.jsonl"}, {"folds", folds}}},
        {"baseline", "logprob",
         {{"seed", 7}, {"trials", "desc/trials.jsonl"}, {"folds", folds},
          {"baseline", {{"kind", "logprob"}, {"logprobs", "desc/logprobs.jsonl"}}}}},
        {"baseline", "hybrid",
         {{"seed", 8}, {"trials", "horizon/trials.jsonl"}, {"folds", folds}, {"baseline", {{"kind", "hybrid"}}}}},
        {"simulate", "simulate",
         {{"seed", 9}, {"trials", "desc/trials.jsonl"}, {"simulate", {{"fit_report", "fit/fit_report.json"}}}}},
        {"simulate", "simulate_median",
         {{"seed", 9},
          {"trials", "desc/trials.jsonl"},
          {"simulate", {{"fit_report", "fit/fit_report.json"}, {"mode", "median_threshold"}}}}},
        {"curves", "curves", {{"seed", 10}, {"trials", "horizon/trials.jsonl"}}},
        {"indifference", "indifference", {{"seed", 11}, {"trials", "es/trials.jsonl"}}},
        {"bms", "bms",
         {{"seed", 12},
          {"bms",
           {{"samples", 20000},
            {"reports", {"fit/fit_report.json", "fit_re/fit_report.json", "random/fit_report.json"}}}}}},
        {"transfer", "transfer",
         {{"seed", 13},
          {"alpha_grid", small_grid},
          {"transfer",
           {{"train",
             {{{"trials", "desc/trials.jsonl"}, {"embeddings", "desc/embeddings.cntr"}},
              {{"trials", "desc_b/trials.jsonl"}, {"embeddings", "desc_b/embeddings.cntr"}}}},
            {"holdout", {{"trials", "desc_c/trials.jsonl"}, {"embeddings", "desc_c/embeddings.cntr"}}}}}}},
        {"report", "report",
         {{"seed", 14},
          {"report",
           {{"inputs", {"fit/fit_report.json", "fit_re/fit_report.json", "random/fit_report.json",
                        "logprob/fit_report.json"}}}}}},
    };

    std::set<std::string> covered;
    for (const auto& step : steps) {
        const fs::path cfg = write_config(step.name + "_config", step.cfg);
        if (invoke({step.sub, "--config", cfg.string(), "--out", (root / step.name).string()}) != kOk) continue;
        const fs::path rerun = root / (step.name + "_rerun");
        if (invoke({step.sub, "--config", (root / step.name / "manifest.json").string(), "--out", rerun.string()}) != kOk)
            continue;
        for (const auto& entry : fs::directory_iterator(root / step.name)) {
            const fs::path twin = rerun / entry.path().filename();
            if (!fs::exists(twin) || read_file(entry.path()) != read_file(twin))
                outcome.failures.push_back(step.name + "/" + entry.path().filename().string() + " differs on re-run");
        }
        covered.insert(step.sub);
    }
    outcome.summary = std::to_string(steps.size()) + " runs over " + std::to_string(covered.size()) + "/" +
                      std::to_string(kSubcommands.size()) + " subcommands re-run from their manifests";
    if (covered.size() != kSubcommands.size()) outcome.failures.push_back("not every subcommand was exercised");
    if (outcome.failures.empty()) {
        outcome.summary += ", all artifacts bit-identical";
    } else {
        outcome.summary += "; " + std::to_string(outcome.failures.size()) + " problem(s): " + outcome.failures.front();
        const std::string log = sink.str();
        if (!log.empty()) outcome.summary += " | " + log.substr(log.size() > 300 ? log.size() - 300 : 0);
    }
    return outcome;
}

} // namespace centaur::cli
