#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "mnn/cross_validate.hpp"
#include "mnn/io.hpp"
#include "mnn/metrics.hpp"
#include "mnn/parallel.hpp"
#include "mnn/pipeline.hpp"
#include "mnn/synth.hpp"

namespace mnn {

enum class ExperimentMode { synth_n_sweep, synth_beta_sweep, fit_predict, ingest_eval };

inline std::string to_string(ExperimentMode m) {
    switch (m) {
        case ExperimentMode::synth_n_sweep: return "synth_n_sweep";
        case ExperimentMode::synth_beta_sweep: return "synth_beta_sweep";
        case ExperimentMode::fit_predict: return "fit_predict";
        case ExperimentMode::ingest_eval: return "ingest_eval";
    }
    throw std::invalid_argument("unknown mode");
}

inline ExperimentMode mode_from_string(const std::string& name) {
    if (name == "synth_n_sweep") return ExperimentMode::synth_n_sweep;
    if (name == "synth_beta_sweep") return ExperimentMode::synth_beta_sweep;
    if (name == "fit_predict") return ExperimentMode::fit_predict;
    if (name == "ingest_eval") return ExperimentMode::ingest_eval;
    throw std::invalid_argument("unknown mode: " + name);
}

/// Fixed values plus an axis-aligned grid; the grid's cartesian product is
/// cross-validated, the fixed values ride along on every point.
struct HyperConfig {
    ParamSet fixed;
    std::map<std::string, std::vector<double>> grid;
    bool grid_specified = false;  // an explicit (possibly empty) grid replaces the default

    std::vector<ParamSet> expand() const {
        std::vector<ParamSet> points{fixed};
        for (const auto& [key, values] : grid) {
            if (values.empty()) continue;
            std::vector<ParamSet> next;
            next.reserve(points.size() * values.size());
            for (const auto& p : points)
                for (double v : values) {
                    ParamSet q = p;
                    q[key] = v;
                    next.push_back(std::move(q));
                }
            points = std::move(next);
        }
        return points;
    }
};

struct ExperimentConfig {
    ExperimentMode mode = ExperimentMode::synth_beta_sweep;
    ModelConfig model;
    std::vector<Algorithm> algorithms{Algorithm::mnn_als, Algorithm::usvt_known_rank};
    std::map<std::string, HyperConfig> hyper;  // keyed by algorithm name
    std::vector<double> betas{0.0, 1.0 / 6.0, 0.25};
    std::vector<Index> n_values{100, 562, 3162};
    int repeats = 10;
    int folds = 16;
    std::uint64_t seed = 1;
    std::string output_dir = "out";
    std::string input_csv;
    double holdout_fraction = 0.1;
    bool timing = true;   // write wall-clock fit times; disable for byte-stable reports
    int threads = 0;      // 0 = auto; MNN_THREADS caps either way

    void validate() const {
        if (repeats < 1) throw std::invalid_argument("ExperimentConfig: repeats must be >= 1");
        if (folds < 2) throw std::invalid_argument("ExperimentConfig: folds must be >= 2");
        if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0))
            throw std::invalid_argument("ExperimentConfig: holdout_fraction outside (0, 1)");
        if (algorithms.empty())
            throw std::invalid_argument("ExperimentConfig: no algorithms selected");
        const bool needs_csv =
            mode == ExperimentMode::ingest_eval ||
            (mode == ExperimentMode::fit_predict && model.n_users == 0);
        if (needs_csv && input_csv.empty())
            throw std::invalid_argument("ExperimentConfig: mode requires input_csv");
    }
};

/// One fitted-and-scored repeat.
struct RunRow {
    std::string algorithm;
    double beta = 0.0;
    Index n = 0;
    int repeat = 0;
    MetricsReport metrics;
    double fit_seconds = 0.0;  // cross-validation plus final fit
    ParamSet chosen;
};

struct AggregateRow {
    std::string algorithm;
    double beta = 0.0;
    Index n = 0;
    int repeats = 0;
    double r2_mean = 0.0, r2_std = 0.0;
    double mse_mean = 0.0, mse_std = 0.0;
    double mae_mean = 0.0, mae_std = 0.0;
};

struct RunReport {
    std::vector<RunRow> rows;
    std::vector<AggregateRow> aggregates;
    std::vector<std::string> errors;  // failed repeats, recorded and skipped
    nlohmann::json config_echo;
};

// ---------------------------------------------------------------------------
// JSON (de)serialization
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const ExperimentConfig& c) {
    nlohmann::json j;
    j["mode"] = to_string(c.mode);
    j["model"] = {{"n_users", c.model.n_users},   {"n_items", c.model.n_items},
                  {"d", c.model.d},               {"r", c.model.r},
                  {"beta", c.model.beta},         {"noise_sigma", c.model.noise_sigma},
                  {"seed", c.model.seed},
                  {"outcome_kind", c.model.outcome_kind == OutcomeKind::exp_separable
                                       ? "exp_separable" : "custom"}};
    nlohmann::json algs = nlohmann::json::array();
    for (auto a : c.algorithms) algs.push_back(to_string(a));
    j["algorithms"] = algs;
    nlohmann::json hyper;
    for (const auto& [name, h] : c.hyper) {
        nlohmann::json entry;
        entry["fixed"] = h.fixed;
        entry["grid"] = h.grid;
        hyper[name] = entry;
    }
    j["hyper"] = hyper;
    j["betas"] = c.betas;
    j["n_values"] = c.n_values;
    j["repeats"] = c.repeats;
    j["folds"] = c.folds;
    j["seed"] = c.seed;
    j["output_dir"] = c.output_dir;
    j["input_csv"] = c.input_csv;
    j["holdout_fraction"] = c.holdout_fraction;
    j["timing"] = c.timing;
    j["threads"] = c.threads;
    return j;
}

inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    if (j.contains("mode")) c.mode = mode_from_string(j.at("mode").get<std::string>());
    if (j.contains("model")) {
        const auto& m = j.at("model");
        if (m.contains("n_users")) c.model.n_users = m.at("n_users").get<Index>();
        if (m.contains("n_items")) c.model.n_items = m.at("n_items").get<Index>();
        if (m.contains("d")) c.model.d = m.at("d").get<int>();
        if (m.contains("r")) c.model.r = m.at("r").get<int>();
        if (m.contains("beta")) c.model.beta = m.at("beta").get<double>();
        if (m.contains("noise_sigma")) c.model.noise_sigma = m.at("noise_sigma").get<double>();
        if (m.contains("seed")) c.model.seed = m.at("seed").get<std::uint64_t>();
        if (m.contains("outcome_kind"))
            c.model.outcome_kind = m.at("outcome_kind").get<std::string>() == "custom"
                                       ? OutcomeKind::custom : OutcomeKind::exp_separable;
    }
    if (j.contains("algorithms")) {
        c.algorithms.clear();
        for (const auto& a : j.at("algorithms"))
            c.algorithms.push_back(algorithm_from_string(a.get<std::string>()));
    } else if (j.contains("algorithm")) {
        c.algorithms = {algorithm_from_string(j.at("algorithm").get<std::string>())};
    }
    if (j.contains("hyper")) {
        for (const auto& [name, entry] : j.at("hyper").items()) {
            HyperConfig h;
            if (entry.contains("fixed"))
                h.fixed = entry.at("fixed").get<std::map<std::string, double>>();
            if (entry.contains("grid")) {
                h.grid = entry.at("grid").get<std::map<std::string, std::vector<double>>>();
                h.grid_specified = true;
            }
            c.hyper[name] = std::move(h);
        }
    }
    if (j.contains("betas")) c.betas = j.at("betas").get<std::vector<double>>();
    if (j.contains("n_values")) c.n_values = j.at("n_values").get<std::vector<Index>>();
    if (j.contains("repeats")) c.repeats = j.at("repeats").get<int>();
    if (j.contains("folds")) c.folds = j.at("folds").get<int>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("input_csv")) c.input_csv = j.at("input_csv").get<std::string>();
    if (j.contains("holdout_fraction")) c.holdout_fraction = j.at("holdout_fraction").get<double>();
    if (j.contains("timing")) c.timing = j.at("timing").get<bool>();
    if (j.contains("threads")) c.threads = j.at("threads").get<int>();
    return c;
}

// ---------------------------------------------------------------------------
// Internals
// ---------------------------------------------------------------------------

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

/// Default hyperparameters for an algorithm run against a known-model
/// synthetic dataset; user-provided entries override field by field.
inline HyperConfig default_hyper(Algorithm alg, const ModelConfig& model) {
    HyperConfig h;
    switch (alg) {
        case Algorithm::mnn_als:
            h.fixed = {{"mask_dim", static_cast<double>(model.d)},
                       {"rank", static_cast<double>(model.r)},
                       {"lambda", 1e-2}};
            h.grid = {{"epsilon", {0.05, 1.0 / 12, 0.125, 1.0 / 6, 0.25}},
                      {"min_obs", {1, 2, 5, 10, 20}}};
            break;
        case Algorithm::mnn_path:
            h.fixed = {{"mask_dim", static_cast<double>(model.d)}, {"rank", 1.0}};
            h.grid = {{"epsilon", {0.05, 1.0 / 12, 0.125, 1.0 / 6, 0.25}},
                      {"min_obs", {1, 2, 5, 10, 20}}};
            break;
        case Algorithm::usvt_known_rank:
            h.fixed = {{"rank", static_cast<double>(model.r)}, {"clip", 1.0}};
            break;
        case Algorithm::usvt_standard:
            h.fixed = {{"eta", 0.02}, {"clip", 1.0}};
            break;
    }
    return h;
}

inline HyperConfig hyper_for(const ExperimentConfig& config, Algorithm alg,
                             const ModelConfig& model) {
    HyperConfig h = default_hyper(alg, model);
    auto it = config.hyper.find(to_string(alg));
    if (it != config.hyper.end()) {
        for (const auto& [k, v] : it->second.fixed) {
            h.fixed[k] = v;
            h.grid.erase(k);  // a user-fixed value retires the default grid axis
        }
        if (it->second.grid_specified) h.grid = it->second.grid;
    }
    for (const auto& [k, values] : h.grid) {
        (void)values;
        h.fixed.erase(k);  // gridded keys are not fixed
    }
    return h;
}

inline std::unique_ptr<CvPipeline> make_pipeline(Algorithm alg, std::uint64_t seed) {
    if (alg == Algorithm::mnn_als || alg == Algorithm::mnn_path) {
        MnnOptions base;
        base.use_path = alg == Algorithm::mnn_path;
        base.seed = seed;
        return std::make_unique<MnnCvPipeline>(base);
    }
    return std::make_unique<UsvtCvPipeline>(alg);
}

/// Tune (when the grid has more than one point) and fit on the full
/// training set. Returns the fitted predictor, selected parameters, and
/// elapsed seconds.
struct FitOutcome {
    std::unique_ptr<Predictor> model;
    ParamSet chosen;
    double seconds = 0.0;
};

inline FitOutcome tune_and_fit(const ObservationSet& train, Algorithm alg,
                               const HyperConfig& hyper, int folds, std::uint64_t seed) {
    const auto started = std::chrono::steady_clock::now();
    auto grid = hyper.expand();
    auto pipeline = make_pipeline(alg, seed);

    FitOutcome out;
    if (grid.size() > 1) {
        Rng cv_rng(mix_seed(seed ^ 0xc01dULL));
        out.chosen = cross_validate(train, folds, grid, *pipeline, cv_rng).best;
    } else {
        out.chosen = grid.front();
    }
    pipeline->prepare_fold(train);
    out.model = pipeline->fit(train, out.chosen);
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return out;
}

struct SamplePoint {
    double truth = 0.0;
    double pred = 0.0;
};

inline std::vector<Cell> sample_cells(Index n, Index m, std::size_t quota, Rng& rng) {
    const std::size_t total = static_cast<std::size_t>(n) * static_cast<std::size_t>(m);
    quota = std::min(quota, total);
    std::set<std::pair<Index, Index>> chosen;
    std::uniform_int_distribution<Index> row(0, n - 1), col(0, m - 1);
    while (chosen.size() < quota) chosen.insert({row(rng), col(rng)});
    std::vector<Cell> cells;
    cells.reserve(chosen.size());
    for (const auto& [i, j] : chosen) cells.push_back({i, j});
    return cells;
}

/// Full-matrix metrics without materializing the prediction.
inline MetricsReport metrics_vs_truth(const Predictor& model, const Matrix& truth) {
    MetricsAccumulator acc;
    for (Index i = 0; i < truth.rows(); ++i)
        for (Index j = 0; j < truth.cols(); ++j) acc.add(model.at(i, j), truth(i, j));
    return acc.finish();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Report files
// ---------------------------------------------------------------------------

inline void write_report_csv(const std::string& path, const std::vector<RunRow>& rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_report_csv: cannot open " + path);
    out << "algorithm,beta,n,repeat,r2,mse,mae,fit_seconds\n";
    for (const auto& r : rows) {
        out << r.algorithm << ',' << mnn::detail::format_double(r.beta) << ',' << r.n << ','
            << r.repeat << ',' << mnn::detail::format_double(r.metrics.r2) << ','
            << mnn::detail::format_double(r.metrics.mse) << ','
            << mnn::detail::format_double(r.metrics.mae) << ','
            << mnn::detail::format_double(r.fit_seconds) << '\n';
    }
}

/// Parse a report.csv back into rows (columns as written by write_report_csv).
inline std::vector<RunRow> load_report_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_report_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line) ||
        mnn::detail::strip_cr(line) != "algorithm,beta,n,repeat,r2,mse,mae,fit_seconds")
        throw std::runtime_error("load_report_csv: bad header in " + path);
    std::vector<RunRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        line = mnn::detail::strip_cr(line);
        if (line.empty()) continue;
        auto fields = mnn::detail::split_csv_line(line);
        if (fields.size() != 8)
            throw std::runtime_error("load_report_csv: bad row at line " + std::to_string(line_no));
        RunRow r;
        r.algorithm = fields[0];
        r.beta = std::strtod(fields[1].c_str(), nullptr);
        r.n = static_cast<Index>(std::strtoll(fields[2].c_str(), nullptr, 10));
        r.repeat = static_cast<int>(std::strtol(fields[3].c_str(), nullptr, 10));
        r.metrics.r2 = std::strtod(fields[4].c_str(), nullptr);
        r.metrics.r2_defined = !std::isnan(r.metrics.r2);
        r.metrics.mse = std::strtod(fields[5].c_str(), nullptr);
        r.metrics.mae = std::strtod(fields[6].c_str(), nullptr);
        r.fit_seconds = std::strtod(fields[7].c_str(), nullptr);
        rows.push_back(std::move(r));
    }
    return rows;
}

inline std::vector<AggregateRow> aggregate_rows(const std::vector<RunRow>& rows) {
    std::map<std::tuple<std::string, double, Index>, std::vector<const RunRow*>> groups;
    for (const auto& r : rows) groups[{r.algorithm, r.beta, r.n}].push_back(&r);

    std::vector<AggregateRow> out;
    for (const auto& [key, members] : groups) {
        AggregateRow a;
        a.algorithm = std::get<0>(key);
        a.beta = std::get<1>(key);
        a.n = std::get<2>(key);
        a.repeats = static_cast<int>(members.size());
        auto mean_std = [&](auto getter, double& mean, double& stdev) {
            double s = 0.0;
            for (const auto* r : members) s += getter(*r);
            mean = s / static_cast<double>(members.size());
            double sq = 0.0;
            for (const auto* r : members) {
                const double d = getter(*r) - mean;
                sq += d * d;
            }
            stdev = members.size() > 1
                        ? std::sqrt(sq / static_cast<double>(members.size() - 1))
                        : 0.0;
        };
        mean_std([](const RunRow& r) { return r.metrics.r2; }, a.r2_mean, a.r2_std);
        mean_std([](const RunRow& r) { return r.metrics.mse; }, a.mse_mean, a.mse_std);
        mean_std([](const RunRow& r) { return r.metrics.mae; }, a.mae_mean, a.mae_std);
        out.push_back(std::move(a));
    }
    return out;
}

inline std::string format_aggregate_table(const std::vector<AggregateRow>& aggregates) {
    std::ostringstream out;
    out << "algorithm            beta        n   reps      r2 (mean+/-sd)        mse (mean+/-sd)        mae (mean+/-sd)\n";
    char buf[256];
    for (const auto& a : aggregates) {
        std::snprintf(buf, sizeof buf,
                      "%-20s %5.3f %8lld %6d   %8.3f +/- %-7.3f   %9.3f +/- %-8.3f   %8.3f +/- %-7.3f\n",
                      a.algorithm.c_str(), a.beta, static_cast<long long>(a.n), a.repeats,
                      a.r2_mean, a.r2_std, a.mse_mean, a.mse_std, a.mae_mean, a.mae_std);
        out << buf;
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// run_experiment
// ---------------------------------------------------------------------------

namespace detail {

struct SampleSeries {
    std::string algorithm;
    double beta = 0.0;
    Index n = 0;
    std::vector<double> truth;
    std::vector<double> pred;
};

struct TaskResult {
    std::vector<RunRow> rows;
    std::vector<SampleSeries> samples;
    std::vector<std::string> errors;
};

inline void write_samples_csv(const std::string& path, const std::vector<SampleSeries>& series) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_samples_csv: cannot open " + path);
    out << "algorithm,beta,n,truth,pred\n";
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.truth.size(); ++i)
            out << s.algorithm << ',' << format_double(s.beta) << ',' << s.n << ','
                << format_double(s.truth[i]) << ',' << format_double(s.pred[i]) << '\n';
}

inline void write_histogram_csv(const std::string& path, const std::vector<SampleSeries>& series,
                                int bins = 50) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_histogram_csv: cannot open " + path);
    out << "beta,n,series,bin_lo,bin_hi,count\n";

    std::map<std::pair<double, Index>, std::vector<const SampleSeries*>> groups;
    for (const auto& s : series) groups[{s.beta, s.n}].push_back(&s);

    for (const auto& [key, members] : groups) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (const auto* s : members)
            for (std::size_t i = 0; i < s->truth.size(); ++i) {
                lo = std::min({lo, s->truth[i], s->pred[i]});
                hi = std::max({hi, s->truth[i], s->pred[i]});
            }
        if (!(hi > lo)) hi = lo + 1.0;
        const double width = (hi - lo) / bins;
        auto bin_of = [&](double v) {
            int b = static_cast<int>((v - lo) / width);
            return std::clamp(b, 0, bins - 1);
        };
        auto emit = [&](const std::string& name, auto&& values) {
            std::vector<std::size_t> counts(bins, 0);
            for (double v : values) ++counts[bin_of(v)];
            for (int b = 0; b < bins; ++b)
                out << format_double(key.first) << ',' << key.second << ',' << name << ','
                    << format_double(lo + b * width) << ',' << format_double(lo + (b + 1) * width)
                    << ',' << counts[b] << '\n';
        };
        emit("truth", members.front()->truth);
        for (const auto* s : members) emit(s->algorithm, s->pred);
    }
}

inline void write_params_csv(const std::string& path, const std::vector<RunRow>& rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_params_csv: cannot open " + path);
    out << "algorithm,beta,n,repeat,param,value\n";
    for (const auto& r : rows)
        for (const auto& [k, v] : r.chosen)
            out << r.algorithm << ',' << format_double(r.beta) << ',' << r.n << ',' << r.repeat
                << ',' << k << ',' << format_double(v) << '\n';
}

inline void sort_rows(std::vector<RunRow>& rows) {
    std::sort(rows.begin(), rows.end(), [](const RunRow& a, const RunRow& b) {
        return std::tie(a.algorithm, a.beta, a.n, a.repeat) <
               std::tie(b.algorithm, b.beta, b.n, b.repeat);
    });
}

inline std::uint64_t fit_seed_for(std::uint64_t base, int repeat, std::size_t alg_index) {
    return mix_seed(base ^ (0x10000003ULL * (static_cast<std::uint64_t>(repeat) + 1)) ^
                    ((alg_index + 1) << 56));
}

/// Synthetic sweep worker: generate one repeat's data, then tune, fit, and
/// score every algorithm on it.
inline TaskResult run_synth_task(const ExperimentConfig& config, const ModelConfig& model,
                                 int repeat, std::size_t sample_quota) {
    TaskResult result;
    Rng data_rng(config.seed + static_cast<std::uint64_t>(repeat));
    LatentFactors factors = sample_latent_factors(model, data_rng);
    GroundTruth truth = make_ground_truth(model, factors);
    ObservationSet obs = sample_observations(truth, model.noise_sigma, data_rng);

    std::vector<Cell> sample;
    if (repeat == 0 && sample_quota > 0) {
        Rng sample_rng(mix_seed(config.seed ^ 0x5a3317ULL ^ static_cast<std::uint64_t>(model.n_users) ^
                                (static_cast<std::uint64_t>(model.beta * 1e6) << 16)));
        sample = sample_cells(model.n_users, model.n_items, sample_quota, sample_rng);
    }

    for (std::size_t ai = 0; ai < config.algorithms.size(); ++ai) {
        const Algorithm alg = config.algorithms[ai];
        try {
            FitOutcome fit = tune_and_fit(obs, alg, hyper_for(config, alg, model), config.folds,
                                          fit_seed_for(config.seed, repeat, ai));
            RunRow row;
            row.algorithm = to_string(alg);
            row.beta = model.beta;
            row.n = model.n_users;
            row.repeat = repeat;
            row.metrics = metrics_vs_truth(*fit.model, truth.outcomes);
            row.fit_seconds = config.timing ? fit.seconds : 0.0;
            row.chosen = fit.chosen;
            result.rows.push_back(std::move(row));

            if (!sample.empty()) {
                SampleSeries s;
                s.algorithm = to_string(alg);
                s.beta = model.beta;
                s.n = model.n_users;
                for (const Cell& c : sample) {
                    s.truth.push_back(truth.outcomes(c.row, c.col));
                    s.pred.push_back(fit.model->at(c.row, c.col));
                }
                result.samples.push_back(std::move(s));
            }
        } catch (const std::exception& e) {
            result.errors.push_back(to_string(alg) + " beta=" + format_double(model.beta) +
                                    " n=" + std::to_string(model.n_users) + " repeat=" +
                                    std::to_string(repeat) + ": " + e.what());
        }
    }
    return result;
}

/// Held-out evaluation worker for ingested data: one 90/10 style split.
inline TaskResult run_holdout_task(const ExperimentConfig& config, const ObservationSet& obs,
                                   int repeat, std::size_t sample_quota) {
    TaskResult result;
    Rng split_rng(config.seed + static_cast<std::uint64_t>(repeat));
    std::vector<std::size_t> order(obs.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), split_rng);
    std::size_t n_hold = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(config.holdout_fraction *
                                                 static_cast<double>(obs.size()))));
    n_hold = std::min(n_hold, obs.size() - 1);

    std::vector<char> held(obs.size(), 0);
    for (std::size_t i = 0; i < n_hold; ++i) held[order[i]] = 1;
    std::vector<Observation> train_entries;
    train_entries.reserve(obs.size() - n_hold);
    std::vector<Cell> test_cells;
    std::vector<double> test_truth;
    for (std::size_t i = 0; i < obs.size(); ++i) {
        const auto& e = obs.entries()[i];
        if (held[i]) {
            test_cells.push_back({e.row, e.col});
            test_truth.push_back(e.value);
        } else {
            train_entries.push_back(e);
        }
    }
    ObservationSet train = ObservationSet::from_entries(obs.n_users(), obs.n_items(),
                                                        std::move(train_entries), obs.rho_hint);

    ModelConfig pseudo;  // carries dimensions and default ranks into hyper_for
    pseudo.n_users = obs.n_users();
    pseudo.n_items = obs.n_items();
    pseudo.d = 5;
    pseudo.r = 5;

    for (std::size_t ai = 0; ai < config.algorithms.size(); ++ai) {
        const Algorithm alg = config.algorithms[ai];
        try {
            FitOutcome fit = tune_and_fit(train, alg, hyper_for(config, alg, pseudo), config.folds,
                                          fit_seed_for(config.seed, repeat, ai));
            std::vector<double> pred(test_cells.size());
            for (std::size_t i = 0; i < test_cells.size(); ++i)
                pred[i] = fit.model->at(test_cells[i].row, test_cells[i].col);

            RunRow row;
            row.algorithm = to_string(alg);
            row.beta = 0.0;
            row.n = obs.n_users();
            row.repeat = repeat;
            row.metrics = compute_metrics(pred, test_truth);
            row.fit_seconds = config.timing ? fit.seconds : 0.0;
            row.chosen = fit.chosen;
            result.rows.push_back(std::move(row));

            if (repeat == 0 && sample_quota > 0) {
                SampleSeries s;
                s.algorithm = to_string(alg);
                s.beta = 0.0;
                s.n = obs.n_users();
                const std::size_t take = std::min(sample_quota, test_cells.size());
                for (std::size_t i = 0; i < take; ++i) {
                    s.truth.push_back(test_truth[i]);
                    s.pred.push_back(pred[i]);
                }
                result.samples.push_back(std::move(s));
            }
        } catch (const std::exception& e) {
            result.errors.push_back(to_string(alg) + " repeat=" + std::to_string(repeat) + ": " +
                                    e.what());
        }
    }
    return result;
}

}  // namespace detail

inline RunReport run_experiment(const ExperimentConfig& config) {
    config.validate();
    namespace fs = std::filesystem;
    fs::create_directories(config.output_dir);
    const auto out_path = [&](const std::string& name) {
        return (fs::path(config.output_dir) / name).string();
    };

    RunReport report;
    report.config_echo = to_json(config);
    const int threads = effective_threads(config.threads);
    std::vector<detail::TaskResult> results;

    switch (config.mode) {
        case ExperimentMode::synth_beta_sweep:
        case ExperimentMode::synth_n_sweep: {
            std::vector<ModelConfig> models;
            if (config.mode == ExperimentMode::synth_beta_sweep) {
                for (double beta : config.betas) {
                    ModelConfig m = config.model;
                    m.beta = beta;
                    m.validate();
                    models.push_back(m);
                }
            } else {
                for (Index n : config.n_values) {
                    ModelConfig m = config.model;
                    m.n_users = n;
                    m.n_items = n;
                    m.validate();
                    models.push_back(m);
                }
            }
            const std::size_t quota =
                10000 / std::max<std::size_t>(1, models.size() * config.algorithms.size());
            std::vector<std::pair<std::size_t, int>> tasks;  // (model index, repeat)
            for (std::size_t mi = 0; mi < models.size(); ++mi)
                for (int t = 0; t < config.repeats; ++t) tasks.emplace_back(mi, t);
            results.resize(tasks.size());
            parallel_for(tasks.size(), threads, [&](std::size_t i) {
                results[i] = detail::run_synth_task(config, models[tasks[i].first],
                                                    tasks[i].second, quota);
            });
            break;
        }
        case ExperimentMode::ingest_eval: {
            TriplesData data = ingest_triples(config.input_csv);
            const std::size_t quota = 10000 / std::max<std::size_t>(1, config.algorithms.size());
            results.resize(config.repeats);
            parallel_for(config.repeats, threads, [&](std::size_t t) {
                results[t] = detail::run_holdout_task(config, data.obs, static_cast<int>(t), quota);
            });
            break;
        }
        case ExperimentMode::fit_predict: {
            ObservationSet obs(1, 1);
            Matrix truth;
            bool have_truth = false;
            if (!config.input_csv.empty()) {
                obs = ingest_triples(config.input_csv).obs;
            } else {
                ModelConfig m = config.model;
                m.validate();
                Rng data_rng(config.seed);
                LatentFactors factors = sample_latent_factors(m, data_rng);
                GroundTruth gt = make_ground_truth(m, factors);
                obs = sample_observations(gt, m.noise_sigma, data_rng);
                truth = std::move(gt.outcomes);
                have_truth = true;
            }
            detail::TaskResult task;
            for (std::size_t ai = 0; ai < config.algorithms.size(); ++ai) {
                const Algorithm alg = config.algorithms[ai];
                try {
                    detail::FitOutcome fit =
                        tune_and_fit(obs, alg, detail::hyper_for(config, alg, config.model),
                                     config.folds, detail::fit_seed_for(config.seed, 0, ai));
                    Matrix estimate = fit.model->full(obs.n_users(), obs.n_items());
                    write_matrix_csv(out_path("estimates_" + to_string(alg) + ".csv"), estimate);
                    if (have_truth) {
                        RunRow row;
                        row.algorithm = to_string(alg);
                        row.beta = config.model.beta;
                        row.n = obs.n_users();
                        row.repeat = 0;
                        row.metrics = compute_metrics(estimate, truth);
                        row.fit_seconds = config.timing ? fit.seconds : 0.0;
                        row.chosen = fit.chosen;
                        task.rows.push_back(std::move(row));
                    }
                } catch (const std::exception& e) {
                    task.errors.push_back(to_string(alg) + ": " + e.what());
                }
            }
            results.push_back(std::move(task));
            break;
        }
    }

    std::vector<detail::SampleSeries> samples;
    for (auto& r : results) {
        report.rows.insert(report.rows.end(), r.rows.begin(), r.rows.end());
        report.errors.insert(report.errors.end(), r.errors.begin(), r.errors.end());
        samples.insert(samples.end(), r.samples.begin(), r.samples.end());
    }
    if (report.rows.empty() && !report.errors.empty()) {
        std::string msg = "run_experiment: all repeats failed; first error: " + report.errors.front();
        throw std::runtime_error(msg);
    }
    detail::sort_rows(report.rows);
    std::sort(samples.begin(), samples.end(), [](const auto& a, const auto& b) {
        return std::tie(a.algorithm, a.beta, a.n) < std::tie(b.algorithm, b.beta, b.n);
    });
    report.aggregates = aggregate_rows(report.rows);

    write_report_csv(out_path("report.csv"), report.rows);
    detail::write_params_csv(out_path("params.csv"), report.rows);
    if (!samples.empty()) {
        detail::write_samples_csv(out_path("predictions_sample.csv"), samples);
        detail::write_histogram_csv(out_path("histogram.csv"), samples);
    }
    std::ofstream echo(out_path("config_echo.json"));
    echo << report.config_echo.dump(2) << '\n';
    return report;
}

}  // namespace mnn
