// Command-line front end: simulation, preprocessing, training, evaluation,
// ablations, discretization sweeps, transfer runs, gradient checking, and
// trajectory export. Every run writes a run.json echo of the resolved
// configuration into the output directory.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "dekt/data.hpp"
#include "dekt/training.hpp"
#include "dekt/transfer.hpp"

using nlohmann::json;
namespace fs = std::filesystem;
using namespace dekt;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CliOptions {
    std::string config_path;
    std::string data_path;
    std::string mapping_path;
    std::string out_dir = "out";
    std::string preset;
    std::string variant = "full";
    std::string source_ckpt;
    std::string ckpt;
    std::string student;
    std::string bins_list = "10,100,1000";
    int fold = 0;
    bool all_variants = false;

    // simulate
    SyntheticProfile profile;

    // gradcheck
    int gc_dk = 3;
    int gc_concepts = 4;
    int gc_steps = 4;

    TrainConfig train;
};

json train_config_json(const TrainConfig& c) {
    return json{{"d_k", c.d_k},
                {"bins", c.bins},
                {"length", c.length},
                {"batch_size", c.batch_size},
                {"epochs", c.epochs},
                {"learning_rate", c.learning_rate},
                {"dropout", c.dropout},
                {"val_fraction", c.val_fraction},
                {"seed", c.seed},
                {"variant", variant_to_string(c.variant)},
                {"folds", c.folds},
                {"patience", c.patience},
                {"multi_hot_q", c.multi_hot_q}};
}

void apply_config_file(TrainConfig& c, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file " + path);
    json j = json::parse(in);
    if (j.contains("d_k")) c.d_k = j["d_k"].get<int>();
    if (j.contains("bins")) c.bins = j["bins"].get<int>();
    if (j.contains("length")) c.length = j["length"].get<int>();
    if (j.contains("batch_size")) c.batch_size = j["batch_size"].get<int>();
    if (j.contains("epochs")) c.epochs = j["epochs"].get<int>();
    if (j.contains("learning_rate")) c.learning_rate = j["learning_rate"].get<double>();
    if (j.contains("dropout")) c.dropout = j["dropout"].get<double>();
    if (j.contains("val_fraction")) c.val_fraction = j["val_fraction"].get<double>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("variant")) c.variant = variant_from_string(j["variant"].get<std::string>());
    if (j.contains("folds")) c.folds = j["folds"].get<int>();
    if (j.contains("patience")) c.patience = j["patience"].get<int>();
    if (j.contains("multi_hot_q")) c.multi_hot_q = j["multi_hot_q"].get<bool>();
}

void apply_preset(TrainConfig& c, const std::string& preset) {
    if (preset.empty() || preset == "custom") return;
    if (preset == "assist2012") c.length = 100;
    else if (preset == "assistchall") c.length = 500;
    else if (preset == "ednet-kt1") c.length = 150;
    else throw UsageError("unknown preset '" + preset + "'");
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

void write_run_json(const fs::path& out_dir, const std::string& command, const json& extra) {
    json j = extra;
    j["command"] = command;
    write_json(out_dir / "run.json", j);
}

fs::path ensure_out(const std::string& dir) {
    fs::path p(dir);
    fs::create_directories(p);
    return p;
}

json metrics_json(const MetricsReport& m, const std::string& variant, int fold, int epoch) {
    json j;
    j["variant"] = variant;
    j["fold"] = fold;
    if (epoch >= 0) j["epoch"] = epoch;
    j["rmse"] = m.rmse;
    if (m.auc) j["auc"] = *m.auc;
    else j["auc"] = nullptr;
    j["acc"] = m.acc;
    j["r2"] = m.r2;
    j["n_steps"] = m.n_steps;
    j["emotion_rmse"] = json{{"concentration", m.emotion_rmse[0]},
                             {"boredom", m.emotion_rmse[1]},
                             {"confusion", m.emotion_rmse[2]},
                             {"frustration", m.emotion_rmse[3]},
                             {"mean", m.emotion_rmse_mean}};
    return j;
}

void write_history_csv(const fs::path& path, const std::vector<EpochStats>& history) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "epoch,train_loss,val_auc,val_acc,val_rmse,val_r2\n";
    out.precision(10);
    for (const auto& e : history) {
        out << e.epoch << ',' << e.train_loss << ',';
        if (e.val.auc) out << *e.val.auc;
        out << ',' << e.val.acc << ',' << e.val.rmse << ',' << e.val.r2 << '\n';
    }
}

std::vector<InteractionRecord> load_records(const CliOptions& opt) {
    if (opt.data_path.empty()) throw UsageError("--data is required");
    if (opt.mapping_path.empty()) return parse_interactions_file(opt.data_path);
    std::ifstream in(opt.mapping_path);
    if (!in) throw UsageError("cannot open mapping file " + opt.mapping_path);
    json j = json::parse(in);
    ColumnMapping m;
    if (j.contains("columns"))
        for (auto& [k, v] : j["columns"].items()) m.columns[k] = v.get<std::string>();
    if (j.contains("concept_separator"))
        m.concept_separator = j["concept_separator"].get<std::string>().at(0);
    return parse_interactions_file(opt.data_path, &m);
}

std::vector<std::string> student_ids(const Dataset& data) {
    std::set<std::string> ids;
    for (const auto& s : data.sequences) ids.insert(s.student_id);
    return {ids.begin(), ids.end()};
}

FoldSplit pick_fold(const Dataset& data, const TrainConfig& cfg, int fold) {
    if (fold < 0 || fold >= cfg.folds)
        throw UsageError("fold " + std::to_string(fold) + " out of range [0, " +
                         std::to_string(cfg.folds) + ")");
    auto folds = split_folds(student_ids(data), cfg.folds, cfg.val_fraction, cfg.seed);
    return folds[static_cast<std::size_t>(fold)];
}

void save_train_outputs(const fs::path& out, const TrainConfig& cfg, const TrainResult& r,
                        int fold) {
    write_json(out / "metrics.json",
               metrics_json(r.test, variant_to_string(cfg.variant), fold, r.best_epoch));
    write_history_csv(out / "history.csv", r.history);
    CheckpointConfig cc{cfg.d_k, cfg.bins, variant_to_string(cfg.variant)};
    save_checkpoint(r.params, cc, (out / "model").string());
}

int cmd_simulate(const CliOptions& opt) {
    auto records = simulate(opt.profile);
    fs::path out = ensure_out(opt.out_dir);
    std::ofstream csv(out / "interactions.csv");
    if (!csv) throw std::runtime_error("cannot write interactions.csv");
    write_interactions_csv(csv, records);
    write_run_json(out, "simulate",
                   json{{"students", opt.profile.students},
                        {"length", opt.profile.length},
                        {"concepts", opt.profile.concepts},
                        {"exercises", opt.profile.exercises},
                        {"coupling", opt.profile.coupling},
                        {"inertia", opt.profile.inertia},
                        {"emit_emotions", opt.profile.emit_emotions},
                        {"seed", opt.profile.seed},
                        {"records", records.size()}});
    std::cout << "wrote " << records.size() << " records to " << (out / "interactions.csv").string()
              << "\n";
    return 0;
}

int cmd_prepare(const CliOptions& opt) {
    auto records = load_records(opt);
    Dataset data = make_dataset(records, opt.train.length, opt.train.bins, opt.train.multi_hot_q);
    fs::path out = ensure_out(opt.out_dir);
    std::ofstream csv(out / "interactions.csv");
    write_interactions_csv(csv, records);
    json summary{{"records", records.size()},
                 {"students", student_ids(data).size()},
                 {"sequences", data.sequences.size()},
                 {"exercises", data.vocab.n_exercises()},
                 {"concepts", data.vocab.n_concepts()},
                 {"answer_time_categories", data.vocab.n_answer_time()},
                 {"interval_time_categories", data.vocab.n_interval_time()},
                 {"has_emotions", data.has_emotions},
                 {"length", opt.train.length},
                 {"bins", opt.train.bins}};
    write_json(out / "summary.json", summary);
    write_run_json(out, "prepare", summary);
    std::cout << summary.dump(2) << "\n";
    return 0;
}

int cmd_train(const CliOptions& opt) {
    auto records = load_records(opt);
    Dataset data = make_dataset(records, opt.train.length, opt.train.bins, opt.train.multi_hot_q);
    FoldSplit fold = pick_fold(data, opt.train, opt.fold);
    fs::path out = ensure_out(opt.out_dir);
    json rc = train_config_json(opt.train);
    rc["data"] = opt.data_path;
    rc["fold"] = opt.fold;
    write_run_json(out, "train", rc);

    TrainResult r = train(opt.train, data, fold);
    save_train_outputs(out, opt.train, r, opt.fold);
    std::cout << metrics_json(r.test, variant_to_string(opt.train.variant), opt.fold, r.best_epoch)
                     .dump(2)
              << "\n";
    return 0;
}

int cmd_evaluate(const CliOptions& opt) {
    if (opt.ckpt.empty()) throw UsageError("--ckpt is required");
    auto ckpt = load_checkpoint(opt.ckpt);
    auto records = load_records(opt);
    Dataset data = make_dataset(records, opt.train.length, ckpt.config.bins, opt.train.multi_hot_q);

    TrainConfig cfg = opt.train;
    cfg.d_k = ckpt.config.d_k;
    cfg.bins = ckpt.config.bins;
    cfg.variant = variant_from_string(ckpt.config.variant);
    ModelConfig mc = model_config_for(cfg, data);
    mc.dropout = 0.0;

    std::vector<const StudentSequence*> seqs;
    for (const auto& s : data.sequences) seqs.push_back(&s);
    bool self_loop = !data.has_emotions;
    auto arrays = evaluate_model(ckpt.params, mc, seqs, data.qmatrix, self_loop, cfg.seed);
    auto metrics = compute_metrics(arrays);

    fs::path out = ensure_out(opt.out_dir);
    write_run_json(out, "evaluate",
                   json{{"ckpt", opt.ckpt},
                        {"data", opt.data_path},
                        {"seed", cfg.seed},
                        {"length", cfg.length},
                        {"self_loop", self_loop}});
    write_json(out / "metrics.json", metrics_json(metrics, ckpt.config.variant, -1, -1));
    std::cout << metrics_json(metrics, ckpt.config.variant, -1, -1).dump(2) << "\n";
    return 0;
}

int cmd_ablate(const CliOptions& opt) {
    auto records = load_records(opt);
    Dataset data = make_dataset(records, opt.train.length, opt.train.bins, opt.train.multi_hot_q);
    FoldSplit fold = pick_fold(data, opt.train, opt.fold);
    fs::path out = ensure_out(opt.out_dir);
    json rc = train_config_json(opt.train);
    rc["data"] = opt.data_path;
    rc["fold"] = opt.fold;
    rc["all"] = opt.all_variants;
    write_run_json(out, "ablate", rc);

    std::vector<std::string> variants;
    if (opt.all_variants)
        variants = {"full", "no-embedding", "no-gain", "no-expression", "no-exercise",
                    "no-interaction"};
    else
        variants = {opt.variant};

    json table = json::array();
    for (const auto& v : variants) {
        variant_from_string(v);  // validates before the long run
        fs::path vdir = out / v;
        fs::create_directories(vdir);
        TrainConfig cfg = opt.train;
        cfg.variant = variant_from_string(v);
        TrainResult r = train(cfg, data, fold);
        save_train_outputs(vdir, cfg, r, opt.fold);
        table.push_back(metrics_json(r.test, v, opt.fold, r.best_epoch));
    }
    write_json(out / "ablation.json", table);
    std::cout << table.dump(2) << "\n";
    return 0;
}

int cmd_sweep(const CliOptions& opt) {
    auto records = load_records(opt);
    std::vector<int> bins;
    std::stringstream ss(opt.bins_list);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        try {
            bins.push_back(std::stoi(tok));
        } catch (const std::exception&) {
            throw UsageError("bad --bins entry '" + tok + "'");
        }
    }
    if (bins.empty()) throw UsageError("--bins must list at least one count");

    fs::path out = ensure_out(opt.out_dir);
    json rc = train_config_json(opt.train);
    rc["data"] = opt.data_path;
    rc["bins_list"] = bins;
    write_run_json(out, "sweep", rc);

    auto rows = sweep_bins(bins, opt.train, records);
    json table = json::array();
    std::ofstream csv(out / "sweep.csv");
    csv << "bins,rmse,auc,acc,r2,emotion_rmse_mean\n";
    csv.precision(10);
    for (const auto& row : rows) {
        table.push_back(
            {{"bins", row.bins},
             {"metrics", metrics_json(row.metrics, variant_to_string(opt.train.variant), 0, -1)}});
        csv << row.bins << ',' << row.metrics.rmse << ',';
        if (row.metrics.auc) csv << *row.metrics.auc;
        csv << ',' << row.metrics.acc << ',' << row.metrics.r2 << ','
            << row.metrics.emotion_rmse_mean << '\n';
    }
    write_json(out / "sweep.json", table);
    std::cout << table.dump(2) << "\n";
    return 0;
}

int cmd_transfer(const CliOptions& opt) {
    if (opt.source_ckpt.empty()) throw UsageError("--source-ckpt is required");
    auto source = load_checkpoint(opt.source_ckpt);
    auto records = load_records(opt);

    TrainConfig cfg = opt.train;
    cfg.d_k = source.config.d_k;
    cfg.bins = source.config.bins;
    Dataset data = make_dataset(records, cfg.length, cfg.bins, cfg.multi_hot_q);
    FoldSplit fold = pick_fold(data, cfg, opt.fold);

    fs::path out = ensure_out(opt.out_dir);
    json rc = train_config_json(cfg);
    rc["data"] = opt.data_path;
    rc["fold"] = opt.fold;
    rc["source_ckpt"] = opt.source_ckpt;
    write_run_json(out, "transfer", rc);

    TrainResult r = train_transfer(source, cfg, data, fold);
    save_train_outputs(out, cfg, r, opt.fold);
    std::cout << metrics_json(r.test, variant_to_string(cfg.variant), opt.fold, r.best_epoch)
                     .dump(2)
              << "\n";
    return 0;
}

int cmd_gradcheck(const CliOptions& opt) {
    if (opt.gc_dk <= 0 || opt.gc_concepts <= 0 || opt.gc_steps < 2)
        throw UsageError("gradcheck needs --dk > 0, --concepts > 0, --steps >= 2");

    SyntheticProfile p;
    p.students = 2;
    p.length = opt.gc_steps;
    p.concepts = opt.gc_concepts;
    p.exercises = 2 * opt.gc_concepts;
    p.seed = opt.train.seed;
    Dataset data = make_dataset(simulate(p), opt.gc_steps, 8);

    TrainConfig cfg = opt.train;
    cfg.d_k = opt.gc_dk;
    cfg.bins = 8;
    cfg.dropout = 0.0;
    ModelConfig mc = model_config_for(cfg, data);
    Rng rng(cfg.seed);
    ParameterStore point = init_parameters(mc, rng);

    auto build = [&](Graph& g, const ParameterStore& store) {
        g.register_parameters(store);
        DektCell cell(g, mc, /*training=*/false);
        PredBatch batch;
        for (const auto& seq : data.sequences)
            unroll_sequence(g, cell, seq, data.qmatrix, false, nullptr, batch);
        return joint_loss(g, batch, true);
    };
    auto rep = grad_check(build, point, 1e-5);
    std::cout << "max relative error: " << rep.max_rel_err << " (parameter " << rep.worst_param
              << "[" << rep.worst_index << "], analytic " << rep.analytic << ", numeric "
              << rep.numeric << ")\n";
    return rep.max_rel_err < 1e-4 ? 0 : 1;
}

int cmd_export_trajectories(const CliOptions& opt) {
    if (opt.ckpt.empty()) throw UsageError("--ckpt is required");
    auto ckpt = load_checkpoint(opt.ckpt);
    auto records = load_records(opt);
    Dataset data = make_dataset(records, opt.train.length, ckpt.config.bins, opt.train.multi_hot_q);

    TrainConfig cfg = opt.train;
    cfg.d_k = ckpt.config.d_k;
    cfg.bins = ckpt.config.bins;
    cfg.variant = variant_from_string(ckpt.config.variant);
    ModelConfig mc = model_config_for(cfg, data);
    mc.dropout = 0.0;

    std::vector<std::string> index_to_exercise(static_cast<std::size_t>(data.vocab.n_exercises()) + 1);
    for (const auto& [token, idx] : data.vocab.exercise)
        index_to_exercise[static_cast<std::size_t>(idx)] = token;

    bool self_loop = !data.has_emotions;
    Rng g0_rng(cfg.seed);
    fs::path out = ensure_out(opt.out_dir);
    write_run_json(out, "export-trajectories",
                   json{{"ckpt", opt.ckpt},
                        {"data", opt.data_path},
                        {"student", opt.student},
                        {"seed", cfg.seed},
                        {"length", cfg.length}});

    int written = 0;
    int chunk = 0;
    for (const auto& seq : data.sequences) {
        if (!opt.student.empty() && seq.student_id != opt.student) continue;
        if (seq.real_length < 2) continue;
        Graph g;
        g.register_parameters(ckpt.params);
        DektCell cell(g, mc, false);
        PredBatch batch;
        std::vector<StepTrace> trace;
        unroll_sequence(g, cell, seq, data.qmatrix, self_loop, &g0_rng, batch, &trace);

        std::ostringstream name;
        name << "trajectory_" << seq.student_id << "_" << chunk++ << ".csv";
        std::ofstream csv(out / name.str());
        csv << "t,exercise_id,y,g_conc,g_bor,g_conf,g_fru,h_related_norm\n";
        csv.precision(10);
        for (const auto& st : trace) {
            csv << st.t << ',' << index_to_exercise[static_cast<std::size_t>(st.exercise_index)]
                << ',' << st.y << ',' << st.g[0] << ',' << st.g[1] << ',' << st.g[2] << ','
                << st.g[3] << ',' << st.h_related_norm << '\n';
        }
        ++written;
    }
    if (written == 0) throw UsageError("no sequences matched student '" + opt.student + "'");
    std::cout << "wrote " << written << " trajectory files to " << out.string() << "\n";
    return 0;
}

void add_train_flags(CLI::App* sub, CliOptions& opt, bool with_bins = true) {
    sub->add_option("--config", opt.config_path, "JSON config file; flags override its values");
    sub->add_option("--dk", opt.train.d_k, "hidden size");
    if (with_bins) sub->add_option("--bins", opt.train.bins, "emotion discretization levels");
    sub->add_option("--length", opt.train.length, "fixed sequence length");
    sub->add_option("--batch", opt.train.batch_size, "batch size");
    sub->add_option("--epochs", opt.train.epochs, "maximum epochs");
    sub->add_option("--lr", opt.train.learning_rate, "learning rate");
    sub->add_option("--dropout", opt.train.dropout, "dropout rate");
    sub->add_option("--val-fraction", opt.train.val_fraction, "validation share of non-test students");
    sub->add_option("--seed", opt.train.seed, "random seed");
    sub->add_option("--folds", opt.train.folds, "cross-validation fold count");
    sub->add_option("--patience", opt.train.patience, "early-stop patience");
    sub->add_option("--fold", opt.fold, "fold index to run");
    sub->add_option("--preset", opt.preset, "dataset preset: assist2012 | assistchall | ednet-kt1 | custom");
    sub->add_flag("--multi-hot", opt.train.multi_hot_q, "uniform multi-hot concept rows");
}

// config file first, then preset, then explicit flags win
void resolve_train_config(CLI::App* sub, CliOptions& opt) {
    auto given = [&](const std::string& name) {
        const CLI::Option* o = sub->get_option_no_throw(name);
        return o != nullptr && o->count() > 0;
    };
    TrainConfig flag_values = opt.train;
    if (!opt.config_path.empty()) {
        TrainConfig from_file;
        apply_config_file(from_file, opt.config_path);
        TrainConfig merged = from_file;
        if (given("--dk")) merged.d_k = flag_values.d_k;
        if (given("--bins")) merged.bins = flag_values.bins;
        if (given("--length")) merged.length = flag_values.length;
        if (given("--batch")) merged.batch_size = flag_values.batch_size;
        if (given("--epochs")) merged.epochs = flag_values.epochs;
        if (given("--lr")) merged.learning_rate = flag_values.learning_rate;
        if (given("--dropout")) merged.dropout = flag_values.dropout;
        if (given("--val-fraction")) merged.val_fraction = flag_values.val_fraction;
        if (given("--seed")) merged.seed = flag_values.seed;
        if (given("--folds")) merged.folds = flag_values.folds;
        if (given("--patience")) merged.patience = flag_values.patience;
        if (given("--multi-hot")) merged.multi_hot_q = flag_values.multi_hot_q;
        merged.variant = flag_values.variant;
        opt.train = merged;
    }
    if (!opt.preset.empty()) {
        TrainConfig probe = opt.train;
        apply_preset(probe, opt.preset);  // validates the name
        // an explicit --length overrides the preset's fixed length
        if (!given("--length")) opt.train = probe;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"dual-state knowledge tracing laboratory"};
    app.require_subcommand(1);
    CliOptions opt;

    auto* sim = app.add_subcommand("simulate", "generate a synthetic interaction log");
    sim->add_option("--students", opt.profile.students);
    sim->add_option("--length", opt.profile.length);
    sim->add_option("--concepts", opt.profile.concepts);
    sim->add_option("--exercises", opt.profile.exercises);
    sim->add_option("--coupling", opt.profile.coupling);
    sim->add_option("--inertia", opt.profile.inertia);
    sim->add_option("--skill-sd", opt.profile.skill_sd);
    sim->add_option("--seed", opt.profile.seed);
    sim->add_flag("--no-emotions", [&opt](std::int64_t) { opt.profile.emit_emotions = false; },
                  "omit the emotion columns");
    sim->add_option("--out", opt.out_dir);

    auto* prep = app.add_subcommand("prepare", "parse a CSV log and report dataset statistics");
    prep->add_option("--data", opt.data_path)->required();
    prep->add_option("--mapping", opt.mapping_path, "column-mapping JSON for foreign layouts");
    prep->add_option("--out", opt.out_dir);
    add_train_flags(prep, opt);

    auto* tr = app.add_subcommand("train", "train on one cross-validation fold");
    tr->add_option("--data", opt.data_path)->required();
    tr->add_option("--mapping", opt.mapping_path);
    tr->add_option("--out", opt.out_dir);
    tr->add_option("--variant", opt.variant, "model variant tag");
    add_train_flags(tr, opt);

    auto* ev = app.add_subcommand("evaluate", "evaluate a checkpoint on a dataset");
    ev->add_option("--data", opt.data_path)->required();
    ev->add_option("--mapping", opt.mapping_path);
    ev->add_option("--ckpt", opt.ckpt, "checkpoint base path")->required();
    ev->add_option("--out", opt.out_dir);
    add_train_flags(ev, opt);

    auto* ab = app.add_subcommand("ablate", "train ablation variants");
    ab->add_option("--data", opt.data_path)->required();
    ab->add_option("--mapping", opt.mapping_path);
    ab->add_option("--variant", opt.variant, "single variant to run");
    ab->add_flag("--all", opt.all_variants, "run every variant");
    ab->add_option("--out", opt.out_dir);
    add_train_flags(ab, opt);

    auto* sw = app.add_subcommand("sweep", "retrain across emotion discretization levels");
    sw->add_option("--data", opt.data_path)->required();
    sw->add_option("--mapping", opt.mapping_path);
    sw->add_option("--bins", opt.bins_list, "comma-separated bin counts");
    sw->add_option("--out", opt.out_dir);
    add_train_flags(sw, opt, /*with_bins=*/false);

    auto* tf = app.add_subcommand("transfer", "self-loop training on an emotionless dataset");
    tf->add_option("--data", opt.data_path)->required();
    tf->add_option("--mapping", opt.mapping_path);
    tf->add_option("--source-ckpt", opt.source_ckpt, "checkpoint base path of the emotion-trained model")
        ->required();
    tf->add_option("--out", opt.out_dir);
    add_train_flags(tf, opt);

    auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient verification");
    gc->add_option("--dk", opt.gc_dk);
    gc->add_option("--concepts", opt.gc_concepts);
    gc->add_option("--steps", opt.gc_steps);
    gc->add_option("--seed", opt.train.seed);

    auto* ex = app.add_subcommand("export-trajectories", "per-step predictions as CSV");
    ex->add_option("--data", opt.data_path)->required();
    ex->add_option("--mapping", opt.mapping_path);
    ex->add_option("--ckpt", opt.ckpt, "checkpoint base path")->required();
    ex->add_option("--student", opt.student, "restrict to one student id");
    ex->add_option("--out", opt.out_dir);
    add_train_flags(ex, opt);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (sim->parsed()) return cmd_simulate(opt);

        CLI::App* active = nullptr;
        for (CLI::App* s : {prep, tr, ev, ab, sw, tf, ex})
            if (s->parsed()) active = s;
        if (active) resolve_train_config(active, opt);

        if (tr->parsed() || ab->parsed()) opt.train.variant = variant_from_string(opt.variant);

        if (prep->parsed()) return cmd_prepare(opt);
        if (tr->parsed()) return cmd_train(opt);
        if (ev->parsed()) return cmd_evaluate(opt);
        if (ab->parsed()) return cmd_ablate(opt);
        if (sw->parsed()) return cmd_sweep(opt);
        if (tf->parsed()) return cmd_transfer(opt);
        if (gc->parsed()) return cmd_gradcheck(opt);
        if (ex->parsed()) return cmd_export_trajectories(opt);
        return 2;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
