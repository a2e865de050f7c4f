// Command-line front end: synthetic data generation, CSV ingestion, model
// fitting, prediction, evaluation, and the benchmark experiment harness.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "mnn/experiment.hpp"
#include "mnn/io.hpp"
#include "mnn/pipeline.hpp"
#include "mnn/synth.hpp"
#include "mnn/theory.hpp"

namespace {

namespace fs = std::filesystem;

struct SynthArgs {
    mnn::Index n = 200;
    mnn::Index m = 0;  // 0: square
    int d = 5;
    int r = 5;
    double beta = 0.0;
    double sigma = 1.0;
    std::uint64_t seed = 1;
    std::string out_dir = "synth_out";
};

int cmd_synth(const SynthArgs& args) {
    mnn::ModelConfig model;
    model.n_users = args.n;
    model.n_items = args.m > 0 ? args.m : args.n;
    model.d = args.d;
    model.r = args.r;
    model.beta = args.beta;
    model.noise_sigma = args.sigma;
    model.seed = args.seed;
    model.validate();

    mnn::Rng rng(model.seed);
    mnn::LatentFactors factors = mnn::sample_latent_factors(model, rng);
    mnn::GroundTruth truth = mnn::make_ground_truth(model, factors);
    mnn::ObservationSet obs = mnn::sample_observations(truth, model.noise_sigma, rng);

    fs::create_directories(args.out_dir);
    const auto path = [&](const char* name) { return (fs::path(args.out_dir) / name).string(); };
    mnn::export_triples(path("observations.csv"), obs);
    mnn::write_matrix_csv(path("truth.csv"), truth.outcomes);
    std::ofstream meta(path("model.json"));
    nlohmann::json j{{"n_users", model.n_users}, {"n_items", model.n_items},
                     {"d", model.d},             {"r", model.r},
                     {"beta", model.beta},       {"noise_sigma", model.noise_sigma},
                     {"seed", model.seed},       {"rho", model.rho()},
                     {"observed_fraction", obs.observed_fraction()},
                     {"n_observed", obs.size()}};
    meta << j.dump(2) << '\n';

    std::cout << "wrote " << obs.size() << " observations (fraction "
              << obs.observed_fraction() << ") to " << args.out_dir << "\n";
    return 0;
}

int cmd_ingest(const std::string& in, const std::string& out) {
    mnn::TriplesData data = mnn::ingest_triples(in);
    std::cout << "users: " << data.obs.n_users() << "\nitems: " << data.obs.n_items()
              << "\nobserved: " << data.obs.size() << "\nfraction: " << data.obs.observed_fraction()
              << "\n";
    if (!out.empty()) {
        mnn::export_triples(out, data.obs, &data.user_ids, &data.item_ids);
        std::cout << "normalized copy: " << out << "\n";
    }
    return 0;
}

mnn::ParamSet params_from_file_and_flags(const std::string& hyper_file,
                                         const std::vector<std::string>& sets) {
    mnn::ParamSet params;
    if (!hyper_file.empty()) {
        std::ifstream in(hyper_file);
        if (!in) throw std::invalid_argument("cannot open hyper file " + hyper_file);
        nlohmann::json j;
        in >> j;
        params = j.get<std::map<std::string, double>>();
    }
    for (const auto& kv : sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
        params[kv.substr(0, eq)] = std::stod(kv.substr(eq + 1));
    }
    return params;
}

struct FitArgs {
    std::string in;
    std::string algorithm = "mnn_als";
    std::string hyper_file;
    std::vector<std::string> sets;
    std::uint64_t seed = 1;
    std::string out = "estimates.csv";
    std::string ids_prefix;
};

int cmd_fit(const FitArgs& args) {
    mnn::TriplesData data = mnn::ingest_triples(args.in);
    mnn::ParamSet params = params_from_file_and_flags(args.hyper_file, args.sets);
    mnn::Algorithm alg = mnn::algorithm_from_string(args.algorithm);
    mnn::Matrix estimate = mnn::fit_predict(data.obs, alg, params, args.seed);
    mnn::write_matrix_csv(args.out, estimate);
    if (!args.ids_prefix.empty()) {
        auto dump_ids = [](const std::string& path, const std::vector<std::string>& ids) {
            std::ofstream out(path);
            out << "index,id\n";
            for (std::size_t i = 0; i < ids.size(); ++i) out << i << ',' << ids[i] << '\n';
        };
        dump_ids(args.ids_prefix + "_users.csv", data.user_ids);
        dump_ids(args.ids_prefix + "_items.csv", data.item_ids);
    }
    std::cout << "estimates (" << estimate.rows() << "x" << estimate.cols() << ") -> " << args.out
              << "\n";
    return 0;
}

std::unordered_map<std::string, mnn::Index> load_id_map(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open id map " + path);
    std::unordered_map<std::string, mnn::Index> map;
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        map[line.substr(comma + 1)] = std::stoll(line.substr(0, comma));
    }
    return map;
}

int cmd_predict(const std::string& estimates_path, const std::string& cells_path,
                const std::string& out_path, const std::string& users_map,
                const std::string& items_map) {
    mnn::Matrix estimates = mnn::read_matrix_csv(estimates_path);
    std::unordered_map<std::string, mnn::Index> users, items;
    if (!users_map.empty()) users = load_id_map(users_map);
    if (!items_map.empty()) items = load_id_map(items_map);

    std::ifstream in(cells_path);
    if (!in) throw std::invalid_argument("cannot open cells file " + cells_path);
    std::ofstream out(out_path);
    if (!out) throw std::invalid_argument("cannot open output file " + out_path);

    std::string line;
    if (!std::getline(in, line) || mnn::detail::strip_cr(line) != "user,item")
        throw std::invalid_argument("cells file must start with header 'user,item'");
    out << "user,item,value\n";
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        line = mnn::detail::strip_cr(line);
        if (line.empty()) continue;
        auto fields = mnn::detail::split_csv_line(line);
        if (fields.size() != 2)
            throw std::runtime_error("cells line " + std::to_string(line_no) + ": expected 2 fields");
        auto resolve = [&](const std::unordered_map<std::string, mnn::Index>& map,
                           const std::string& id, mnn::Index limit) {
            mnn::Index idx;
            if (!map.empty()) {
                auto it = map.find(id);
                if (it == map.end())
                    throw std::runtime_error("cells line " + std::to_string(line_no) +
                                             ": unknown id '" + id + "'");
                idx = it->second;
            } else {
                idx = std::stoll(id);
            }
            if (idx < 0 || idx >= limit)
                throw std::runtime_error("cells line " + std::to_string(line_no) +
                                         ": index out of range");
            return idx;
        };
        const mnn::Index i = resolve(users, fields[0], estimates.rows());
        const mnn::Index j = resolve(items, fields[1], estimates.cols());
        out << fields[0] << ',' << fields[1] << ','
            << mnn::detail::format_double(estimates(i, j)) << '\n';
    }
    return 0;
}

int cmd_evaluate(const std::string& pred_path, const std::string& truth_path,
                 const std::string& cells_path) {
    mnn::Matrix pred = mnn::read_matrix_csv(pred_path);
    mnn::Matrix truth = mnn::read_matrix_csv(truth_path);
    mnn::MetricsReport rep;
    if (cells_path.empty()) {
        rep = mnn::compute_metrics(pred, truth);
    } else {
        std::ifstream in(cells_path);
        if (!in) throw std::invalid_argument("cannot open cells file " + cells_path);
        std::string line;
        std::getline(in, line);  // header user,item
        std::vector<mnn::Cell> cells;
        while (std::getline(in, line)) {
            line = mnn::detail::strip_cr(line);
            if (line.empty()) continue;
            auto fields = mnn::detail::split_csv_line(line);
            cells.push_back({std::stoll(fields[0]), std::stoll(fields[1])});
        }
        rep = mnn::compute_metrics(pred, truth, cells);
    }
    nlohmann::json j{{"r2", rep.r2_defined ? nlohmann::json(rep.r2) : nlohmann::json()},
                     {"mse", rep.mse},
                     {"mae", rep.mae},
                     {"n_evaluated", rep.n_evaluated}};
    std::cout << j.dump() << "\n";
    return 0;
}

struct ExperimentFlags {
    std::string config_file;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> algorithm;
    std::optional<double> beta;
    std::optional<mnn::Index> n;
    std::optional<int> repeats;
    std::optional<std::string> mode;
    std::optional<std::string> input_csv;
};

int cmd_experiment(const ExperimentFlags& flags) {
    mnn::ExperimentConfig config;
    if (!flags.config_file.empty()) {
        std::ifstream in(flags.config_file);
        if (!in) throw std::invalid_argument("cannot open config " + flags.config_file);
        nlohmann::json j;
        in >> j;
        config = mnn::experiment_config_from_json(j);
    }
    // Flags win over the file.
    if (flags.mode) config.mode = mnn::mode_from_string(*flags.mode);
    if (flags.seed) config.seed = *flags.seed;
    if (flags.out) config.output_dir = *flags.out;
    if (flags.algorithm) config.algorithms = {mnn::algorithm_from_string(*flags.algorithm)};
    if (flags.beta) {
        config.betas = {*flags.beta};
        config.model.beta = *flags.beta;
    }
    if (flags.n) {
        config.n_values = {*flags.n};
        config.model.n_users = *flags.n;
        config.model.n_items = *flags.n;
    }
    if (flags.repeats) config.repeats = *flags.repeats;
    if (flags.input_csv) config.input_csv = *flags.input_csv;

    mnn::RunReport report = mnn::run_experiment(config);
    for (const auto& err : report.errors) std::cerr << "repeat failed: " << err << "\n";
    std::cout << mnn::format_aggregate_table(report.aggregates);
    std::cout << "report: " << (fs::path(config.output_dir) / "report.csv").string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Matrix completion under latent-factor observation bias"};
    app.require_subcommand(1);

    SynthArgs synth;
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset");
    synth_cmd->add_option("--n", synth.n, "number of users");
    synth_cmd->add_option("--m", synth.m, "number of items (default: square)");
    synth_cmd->add_option("--d", synth.d, "latent dimension");
    synth_cmd->add_option("--r", synth.r, "outcome rank");
    synth_cmd->add_option("--beta", synth.beta, "sparsity exponent");
    synth_cmd->add_option("--sigma", synth.sigma, "noise standard deviation");
    synth_cmd->add_option("--seed", synth.seed, "RNG seed");
    synth_cmd->add_option("--out", synth.out_dir, "output directory");

    std::string ingest_in, ingest_out;
    auto* ingest_cmd = app.add_subcommand("ingest", "validate and summarize a triples CSV");
    ingest_cmd->add_option("--in", ingest_in, "user,item,value CSV")->required();
    ingest_cmd->add_option("--out", ingest_out, "write a normalized copy here");

    FitArgs fit;
    auto* fit_cmd = app.add_subcommand("fit", "fit one algorithm and write the estimate matrix");
    fit_cmd->add_option("--in", fit.in, "user,item,value CSV")->required();
    fit_cmd->add_option("--algorithm", fit.algorithm,
                        "mnn_als | mnn_path | usvt_known_rank | usvt_standard");
    fit_cmd->add_option("--hyper", fit.hyper_file, "JSON file of hyperparameters");
    fit_cmd->add_option("--set", fit.sets, "hyperparameter override key=value (repeatable)");
    fit_cmd->add_option("--seed", fit.seed, "RNG seed");
    fit_cmd->add_option("--out", fit.out, "estimate matrix CSV");
    fit_cmd->add_option("--ids-out", fit.ids_prefix, "write <prefix>_users.csv / _items.csv maps");

    std::string pred_estimates, pred_cells, pred_out, pred_users, pred_items;
    auto* predict_cmd = app.add_subcommand("predict", "look up estimates for a list of cells");
    predict_cmd->add_option("--estimates", pred_estimates, "estimate matrix CSV")->required();
    predict_cmd->add_option("--cells", pred_cells, "user,item CSV of cells")->required();
    predict_cmd->add_option("--out", pred_out, "output triples CSV")->required();
    predict_cmd->add_option("--users", pred_users, "user id map from fit --ids-out");
    predict_cmd->add_option("--items", pred_items, "item id map from fit --ids-out");

    std::string eval_pred, eval_truth, eval_cells;
    auto* eval_cmd = app.add_subcommand("evaluate", "score a prediction matrix against truth");
    eval_cmd->add_option("--pred", eval_pred, "prediction matrix CSV")->required();
    eval_cmd->add_option("--truth", eval_truth, "truth matrix CSV")->required();
    eval_cmd->add_option("--cells", eval_cells, "optional user,item cell list");

    ExperimentFlags ex;
    auto* exp_cmd = app.add_subcommand("experiment", "run a benchmark experiment");
    exp_cmd->add_option("--config", ex.config_file, "experiment config JSON");
    exp_cmd->add_option("--seed", ex.seed, "override seed");
    exp_cmd->add_option("--out", ex.out, "override output directory");
    exp_cmd->add_option("--algorithm", ex.algorithm, "restrict to one algorithm");
    exp_cmd->add_option("--beta", ex.beta, "single sparsity exponent");
    exp_cmd->add_option("--n", ex.n, "single matrix size");
    exp_cmd->add_option("--repeats", ex.repeats, "override repeat count");
    exp_cmd->add_option("--mode", ex.mode,
                        "synth_beta_sweep | synth_n_sweep | fit_predict | ingest_eval");
    exp_cmd->add_option("--in", ex.input_csv, "input triples CSV (ingest modes)");

    try {
        app.parse(argc, argv);
        if (synth_cmd->parsed()) return cmd_synth(synth);
        if (ingest_cmd->parsed()) return cmd_ingest(ingest_in, ingest_out);
        if (fit_cmd->parsed()) return cmd_fit(fit);
        if (predict_cmd->parsed())
            return cmd_predict(pred_estimates, pred_cells, pred_out, pred_users, pred_items);
        if (eval_cmd->parsed()) return cmd_evaluate(eval_pred, eval_truth, eval_cells);
        if (exp_cmd->parsed()) return cmd_experiment(ex);
        return 1;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
