#ifndef SALFOLD_PIPELINE_HPP
#define SALFOLD_PIPELINE_HPP

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "salfold/error.hpp"
#include "salfold/folding.hpp"
#include "salfold/image.hpp"
#include "salfold/irma.hpp"
#include "salfold/lbp.hpp"
#include "salfold/manifest.hpp"
#include "salfold/saliency.hpp"
#include "salfold/svm.hpp"
#include "salfold/synth.hpp"
#include "salfold/util.hpp"

namespace salfold {

// -------------------------------------------------------------- configuration

/// Everything a run needs, loadable from a `key = value` file with CLI
/// overrides applied on top. Unknown keys are rejected.
struct PipelineConfig {
    std::string fold_mode = "saliency"; // saliency | fixed | off
    int grid = 4;                       // base block grid; folding reduces it by one
    SuperposeOp superpose = SuperposeOp::mean;
    SaliencyParams saliency;
    LbpParams lbp; // grid field is derived from fold_mode/grid at use
    SvmParams svm;
    SynthSpec synth;
    int threads = 1;
    std::uint64_t seed = 1;
};

namespace detail {

inline long long config_int(const std::string& key, const std::string& value) {
    std::size_t used = 0;
    long long v = 0;
    try {
        v = std::stoll(value, &used);
    } catch (const std::exception&) {
        raise(Errc::bad_config, key + ": expected an integer, got '" + value + "'");
    }
    if (used != value.size())
        raise(Errc::bad_config, key + ": expected an integer, got '" + value + "'");
    return v;
}

inline double config_double(const std::string& key, const std::string& value) {
    std::size_t used = 0;
    double v = 0;
    try {
        v = std::stod(value, &used);
    } catch (const std::exception&) {
        raise(Errc::bad_config, key + ": expected a number, got '" + value + "'");
    }
    if (used != value.size())
        raise(Errc::bad_config, key + ": expected a number, got '" + value + "'");
    return v;
}

inline bool config_bool(const std::string& key, const std::string& value) {
    if (value == "1" || value == "true" || value == "on") return true;
    if (value == "0" || value == "false" || value == "off") return false;
    raise(Errc::bad_config, key + ": expected a boolean, got '" + value + "'");
}

template <typename T, typename Parse>
std::vector<T> config_list(const std::string& key, const std::string& value, Parse&& parse) {
    std::vector<T> out;
    for (const auto& part : split(value, ',')) {
        const std::string item = trim(part);
        if (item.empty()) raise(Errc::bad_config, key + ": empty list element");
        out.push_back(parse(key, item));
    }
    if (out.empty()) raise(Errc::bad_config, key + ": empty list");
    return out;
}

} // namespace detail

inline void apply_config_entry(PipelineConfig& cfg, const std::string& key,
                               const std::string& value) {
    using detail::config_bool;
    using detail::config_double;
    using detail::config_int;
    if (key == "fold") {
        if (value != "saliency" && value != "fixed" && value != "off")
            raise(Errc::bad_config, "fold: expected saliency, fixed or off, got '" + value + "'");
        cfg.fold_mode = value;
    } else if (key == "grid") {
        cfg.grid = static_cast<int>(config_int(key, value));
    } else if (key == "superpose") {
        cfg.superpose = parse_superpose(value);
    } else if (key == "threads") {
        cfg.threads = static_cast<int>(config_int(key, value));
    } else if (key == "seed") {
        cfg.seed = static_cast<std::uint64_t>(config_int(key, value));
    } else if (key == "saliency.patch_size") {
        cfg.saliency.patch_size = static_cast<int>(config_int(key, value));
    } else if (key == "saliency.k_nearest") {
        cfg.saliency.k_nearest = static_cast<int>(config_int(key, value));
    } else if (key == "saliency.position_weight") {
        cfg.saliency.position_weight = config_double(key, value);
    } else if (key == "saliency.scales") {
        cfg.saliency.scales = detail::config_list<double>(key, value, config_double);
    } else if (key == "saliency.working_resolution") {
        cfg.saliency.working_resolution = static_cast<int>(config_int(key, value));
    } else if (key == "saliency.attended_threshold") {
        cfg.saliency.attended_threshold = config_double(key, value);
    } else if (key == "lbp.neighbors") {
        cfg.lbp.neighbors = static_cast<int>(config_int(key, value));
    } else if (key == "lbp.radii") {
        cfg.lbp.radii = detail::config_list<int>(key, value, [](const std::string& k, const std::string& v) {
            return static_cast<int>(detail::config_int(k, v));
        });
    } else if (key == "lbp.uniform") {
        cfg.lbp.uniform = config_bool(key, value);
    } else if (key == "lbp.mode") {
        if (value == "circular")
            cfg.lbp.mode = LbpNeighborhood::circular;
        else if (value == "square")
            cfg.lbp.mode = LbpNeighborhood::square;
        else
            raise(Errc::bad_config, "lbp.mode: expected circular or square, got '" + value + "'");
    } else if (key == "svm.C") {
        cfg.svm.C = config_double(key, value);
    } else if (key == "svm.gamma") {
        cfg.svm.gamma = config_double(key, value);
    } else if (key == "svm.tolerance") {
        cfg.svm.tolerance = config_double(key, value);
    } else if (key == "svm.kernel") {
        if (value == "rbf")
            cfg.svm.kernel = KernelKind::rbf;
        else if (value == "linear")
            cfg.svm.kernel = KernelKind::linear;
        else
            raise(Errc::bad_config, "svm.kernel: expected rbf or linear, got '" + value + "'");
    } else if (key == "svm.max_iterations") {
        cfg.svm.max_iterations = config_int(key, value);
    } else if (key == "svm.cache_mb") {
        cfg.svm.cache_budget_bytes = static_cast<std::size_t>(config_int(key, value)) << 20;
    } else if (key == "synth.classes") {
        cfg.synth.classes = static_cast<int>(config_int(key, value));
    } else if (key == "synth.train_per_class") {
        cfg.synth.train_per_class = static_cast<int>(config_int(key, value));
    } else if (key == "synth.test_per_class") {
        cfg.synth.test_per_class = static_cast<int>(config_int(key, value));
    } else if (key == "synth.image_size") {
        cfg.synth.image_size = static_cast<int>(config_int(key, value));
    } else if (key == "synth.noise") {
        cfg.synth.noise = config_double(key, value);
    } else {
        raise(Errc::bad_config, "unknown config key '" + key + "'");
    }
}

/// Applies a `key = value` file on top of `base`. '#' starts a comment.
inline PipelineConfig load_config_file(const std::string& path, PipelineConfig base = {}) {
    std::ifstream in(path);
    if (!in) raise(Errc::unreadable_file, path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string stripped = trim(line);
        if (stripped.empty()) continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos)
            raise(Errc::bad_config,
                  path + ":" + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (key.empty() || value.empty())
            raise(Errc::bad_config,
                  path + ":" + std::to_string(lineno) + ": expected key = value");
        apply_config_entry(base, key, value);
    }
    return base;
}

inline void validate_config(const PipelineConfig& cfg) {
    if (cfg.grid < 2) raise(Errc::bad_config, "grid must be at least 2");
    if (cfg.threads < 1) raise(Errc::bad_config, "threads must be at least 1");
    if (cfg.svm.C <= 0.0) raise(Errc::bad_config, "svm.C must be positive");
    if (cfg.svm.gamma < 0.0) raise(Errc::bad_config, "svm.gamma must be non-negative (0 = auto)");
    if (cfg.svm.tolerance <= 0.0) raise(Errc::bad_config, "svm.tolerance must be positive");
    if (cfg.svm.max_iterations < 1) raise(Errc::bad_config, "svm.max_iterations must be positive");
}

/// Extraction grid actually used: folding collapses the base grid by one on
/// each axis, so features come from an (n-1) x (n-1) layout.
inline LbpParams effective_lbp(const PipelineConfig& cfg) {
    LbpParams p = cfg.lbp;
    p.grid = (cfg.fold_mode == "off") ? cfg.grid : cfg.grid - 1;
    return p;
}

/// Single token tying features and models to the full preprocessing setup;
/// any mismatch between producing and consuming configs fails loudly.
inline std::string pipeline_fingerprint(const PipelineConfig& cfg) {
    std::ostringstream os;
    os << effective_lbp(cfg).fingerprint() << "+fold=" << cfg.fold_mode
       << ",base_grid=" << cfg.grid;
    if (cfg.fold_mode != "off") os << ",op=" << superpose_name(cfg.superpose);
    return os.str();
}

// ----------------------------------------------------------------- artifacts

struct ArtifactPaths {
    std::filesystem::path dir;

    explicit ArtifactPaths(const std::string& d) : dir(d) {}
    std::string tmpl() const { return (dir / "saliency_template.txt").string(); }
    std::string plan() const { return (dir / "folding_plan.txt").string(); }
    std::string features() const { return (dir / "train_features.txt").string(); }
    std::string classes() const { return (dir / "class_table.txt").string(); }
    std::string model() const { return (dir / "model.txt").string(); }
    std::string folded_dir() const { return (dir / "folded").string(); }
    std::string predictions() const { return (dir / "predictions.tsv").string(); }
    std::string bench_summary() const { return (dir / "bench_summary.txt").string(); }
};

namespace detail {

/// Writes through a temp file and renames, so failures never leave a
/// truncated artifact behind.
template <typename WriteFn>
void write_atomic(const std::string& path, WriteFn&& write) {
    const std::string tmp = path + ".tmp";
    try {
        write(tmp);
        std::filesystem::rename(tmp, path);
    } catch (...) {
        std::error_code ec;
        std::filesystem::remove(tmp, ec);
        throw;
    }
}

} // namespace detail

inline void save_class_table(const std::vector<IrmaCode>& table, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(Errc::io_error, "cannot write " + path);
    out << "salfold-classes " << table.size() << "\n";
    for (const auto& code : table) out << code.canonical() << "\n";
    if (!out) raise(Errc::io_error, "short write to " + path);
}

inline std::vector<IrmaCode> load_class_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) raise(Errc::unreadable_file, path);
    std::string magic;
    std::size_t n = 0;
    in >> magic >> n;
    if (magic != "salfold-classes" || !in || n == 0)
        raise(Errc::bad_manifest, path + ": bad class table header");
    std::vector<IrmaCode> table;
    table.reserve(n);
    std::string token;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(in >> token)) raise(Errc::bad_manifest, path + ": truncated class table");
        table.push_back(parse_code(token));
    }
    return table;
}

// ------------------------------------------------------------------ commands

inline void run_synth(const std::string& out_dir, const PipelineConfig& cfg,
                      std::ostream& console) {
    SynthSpec spec = cfg.synth;
    spec.seed = cfg.seed;
    const DatasetManifest m = generate_synthetic_corpus(spec, out_dir);
    console << "synth: " << m.entries.size() << " images (" << spec.classes << " classes, "
            << spec.train_per_class << " train + " << spec.test_per_class
            << " test each) under " << out_dir << "\n";
}

namespace detail {

inline std::vector<int> train_labels(const std::vector<const ManifestEntry*>& train,
                                     const std::vector<IrmaCode>& table) {
    std::map<IrmaCode, int> index;
    for (std::size_t i = 0; i < table.size(); ++i) index.emplace(table[i], static_cast<int>(i));
    std::vector<int> labels;
    labels.reserve(train.size());
    for (const auto* e : train) labels.push_back(index.at(e->code));
    return labels;
}

/// Query-side feature path: fold (if planned), re-quantize to 8 bits so the
/// in-memory image matches the cached one byte for byte, then extract.
inline std::vector<double> fold_and_extract(const GrayImage& img, const FoldingPlan* plan,
                                            SuperposeOp op, const LbpParams& lbp) {
    if (!plan) return extract_features(img, lbp);
    const GrayImage folded = quantized(apply_folding(img, *plan, op));
    return extract_features(folded, lbp);
}

} // namespace detail

/// Builds every training-side artifact: the saliency template and folding
/// plan (mode-dependent), the folded-image cache, the training feature set
/// and the class table.
inline void run_preprocess(const std::string& manifest_path, const std::string& out_dir,
                           const PipelineConfig& cfg, std::ostream& console) {
    validate_config(cfg);
    const DatasetManifest manifest = read_manifest(manifest_path);
    const auto train = manifest.split_entries(Split::train);
    if (train.empty()) raise(Errc::empty_input, manifest_path + " has no train images");
    const auto table = manifest.class_table();
    const std::vector<int> labels = detail::train_labels(train, table);

    const ArtifactPaths paths(out_dir);
    std::filesystem::create_directories(paths.dir);

    Stopwatch total;
    FoldingPlan plan;
    bool have_plan = false;
    if (cfg.fold_mode == "saliency") {
        Stopwatch sw;
        std::vector<SaliencyMap> maps;
        maps.reserve(train.size());
        for (const auto* e : train) {
            const GrayImage img = load_image(e->path);
            require_min_dims(img, e->path);
            maps.push_back(compute_saliency(img, cfg.saliency, cfg.threads));
        }
        const SaliencyTemplate tmpl =
            build_template(maps, labels, static_cast<int>(table.size()));
        detail::write_atomic(paths.tmpl(), [&](const std::string& p) { save_template(tmpl, p); });
        plan = plan_folding(tmpl, cfg.grid);
        have_plan = true;
        console << "preprocess: saliency template " << tmpl.width << "x" << tmpl.height
                << " from " << train.size() << " images in " << std::fixed
                << std::setprecision(1) << sw.seconds() << " s\n";
        if (plan.degenerate)
            console << "preprocess: template is flat, falling back to the default fold\n";
    } else if (cfg.fold_mode == "fixed") {
        plan = fixed_plan(cfg.grid);
        have_plan = true;
    }
    if (have_plan) {
        detail::write_atomic(paths.plan(), [&](const std::string& p) { save_plan(plan, p); });
        console << "preprocess: fold columns " << plan.columns.source << "->"
                << plan.columns.target << ", rows " << plan.rows.source << "->"
                << plan.rows.target << " on a " << cfg.grid << "x" << cfg.grid << " grid\n";
    }

    const LbpParams lbp = effective_lbp(cfg);
    SampleSet set;
    set.fingerprint = pipeline_fingerprint(cfg);
    if (have_plan) std::filesystem::create_directories(paths.folded_dir());
    Stopwatch sw;
    try {
        for (std::size_t i = 0; i < train.size(); ++i) {
            const GrayImage img = load_image(train[i]->path);
            require_min_dims(img, train[i]->path);
            if (have_plan) {
                const GrayImage folded = quantized(apply_folding(img, plan, cfg.superpose));
                char name[32];
                std::snprintf(name, sizeof name, "train_%04zu.pgm", i);
                save_pgm(folded, (std::filesystem::path(paths.folded_dir()) / name).string());
                set.add(labels[i], extract_features(folded, lbp));
            } else {
                set.add(labels[i], extract_features(img, lbp));
            }
        }
    } catch (...) {
        // the cache is the one multi-file output; never leave it half-written
        std::error_code ec;
        if (have_plan) std::filesystem::remove_all(paths.folded_dir(), ec);
        throw;
    }
    detail::write_atomic(paths.features(), [&](const std::string& p) { save_features(set, p); });
    detail::write_atomic(paths.classes(),
                         [&](const std::string& p) { save_class_table(table, p); });
    console << "preprocess: " << set.rows() << " feature rows of " << set.dims << " dims in "
            << std::fixed << std::setprecision(1) << sw.seconds() << " s (total "
            << total.seconds() << " s)\n";
}

/// Trains the one-vs-one model from the persisted feature set.
inline void run_train(const std::string& out_dir, const PipelineConfig& cfg,
                      std::ostream& console) {
    validate_config(cfg);
    const ArtifactPaths paths(out_dir);
    const SampleSet set = load_features(paths.features());
    const std::string expected = pipeline_fingerprint(cfg);
    if (set.fingerprint != expected)
        raise(Errc::fingerprint_mismatch,
              "features were built as " + set.fingerprint + ", config asks for " + expected);
    const std::vector<IrmaCode> table = load_class_table(paths.classes());
    for (int l : set.labels)
        if (l < 0 || l >= static_cast<int>(table.size()))
            raise(Errc::corrupt_feature_file, "label outside the class table");

    Stopwatch sw;
    MultiClassModel model = train_multiclass(set.values.data(), set.labels, set.dims,
                                             static_cast<int>(table.size()), cfg.svm,
                                             cfg.threads);
    model.fingerprint = set.fingerprint;
    model.class_names.clear();
    for (const auto& code : table) model.class_names.push_back(code.canonical());

    std::size_t sv_total = 0;
    bool all_converged = true;
    for (const auto& bin : model.binaries) {
        sv_total += bin.sv_count();
        all_converged = all_converged && bin.converged;
    }
    detail::write_atomic(paths.model(), [&](const std::string& p) { save_model(model, p); });
    console << "train: " << model.binaries.size() << " binary models, " << sv_total
            << " support vectors in " << std::fixed << std::setprecision(1) << sw.seconds()
            << " s\n";
    if (!all_converged)
        console << "train: warning, at least one subproblem hit the iteration cap\n";
}

/// Classifies the manifest's test split and writes `image<TAB>code` lines.
inline void run_classify(const std::string& manifest_path, const std::string& out_dir,
                         const std::string& predictions_path, const PipelineConfig& cfg,
                         std::ostream& console) {
    validate_config(cfg);
    const ArtifactPaths paths(out_dir);
    const MultiClassModel model = load_model(paths.model());
    const std::string expected = pipeline_fingerprint(cfg);
    if (model.fingerprint != expected)
        raise(Errc::fingerprint_mismatch,
              "model was built as " + model.fingerprint + ", config asks for " + expected);

    FoldingPlan plan;
    const FoldingPlan* plan_ptr = nullptr;
    if (cfg.fold_mode != "off") {
        plan = load_plan(paths.plan());
        if (plan.grid != cfg.grid)
            raise(Errc::plan_shape_mismatch, "plan grid " + std::to_string(plan.grid) +
                                                 " does not match configured grid " +
                                                 std::to_string(cfg.grid));
        plan_ptr = &plan;
    }

    const DatasetManifest manifest = read_manifest(manifest_path);
    const auto test = manifest.split_entries(Split::test);
    if (test.empty()) raise(Errc::empty_input, manifest_path + " has no test images");

    const LbpParams lbp = effective_lbp(cfg);
    std::ostringstream lines;
    double query_seconds = 0.0;
    for (const auto* e : test) {
        const GrayImage img = load_image(e->path);
        require_min_dims(img, e->path);
        Stopwatch sw;
        const std::vector<double> features =
            detail::fold_and_extract(img, plan_ptr, cfg.superpose, lbp);
        const int pred = predict(model, features.data(), features.size());
        query_seconds += sw.seconds();
        lines << e->path << "\t" << model.class_names[static_cast<std::size_t>(pred)] << "\n";
    }
    detail::write_atomic(predictions_path, [&](const std::string& p) {
        std::ofstream out(p, std::ios::binary);
        if (!out) raise(Errc::io_error, "cannot write " + p);
        out << lines.str();
        if (!out) raise(Errc::io_error, "short write to " + p);
    });
    console << "classify: " << test.size() << " images -> " << predictions_path << "\n";
    console << "classify: mean query latency " << std::fixed << std::setprecision(3)
            << (query_seconds * 1e3 / static_cast<double>(test.size()))
            << " ms (fold+extract+predict, " << cfg.threads << " thread"
            << (cfg.threads == 1 ? "" : "s") << ")\n";
}

/// Scores a prediction file against the manifest's test split with the
/// hierarchical error. The machine-readable summary goes to the console; the
/// optional report file gets the per-image table.
inline RunSummary run_evaluate(const std::string& manifest_path,
                               const std::string& predictions_path,
                               const std::string& report_path, bool propagate_errors,
                               std::ostream& console) {
    const DatasetManifest manifest = read_manifest(manifest_path);
    std::vector<IrmaCode> train_codes;
    for (const auto& e : manifest.entries)
        if (e.split == Split::train) train_codes.push_back(e.code);
    const PositionVocabulary vocab = build_vocabulary(train_codes);
    const auto test = manifest.split_entries(Split::test);
    if (test.empty()) raise(Errc::empty_input, manifest_path + " has no test images");

    std::ifstream in(predictions_path);
    if (!in) raise(Errc::unreadable_file, predictions_path);
    std::map<std::string, std::string> predicted;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const auto fields = split(line, '\t');
        if (fields.size() != 2)
            raise(Errc::bad_manifest, predictions_path + ":" + std::to_string(lineno) +
                                          ": expected image<TAB>code");
        if (!predicted.emplace(trim(fields[0]), trim(fields[1])).second)
            raise(Errc::bad_manifest, predictions_path + ":" + std::to_string(lineno) +
                                          ": duplicate image id");
    }

    std::vector<std::string> ids;
    std::vector<IrmaCode> truths, preds;
    for (const auto* e : test) {
        const auto it = predicted.find(e->path);
        if (it == predicted.end())
            raise(Errc::length_mismatch, "no prediction for " + e->path);
        ids.push_back(e->path);
        truths.push_back(e->code);
        preds.push_back(parse_code(it->second));
    }
    const RunSummary summary = evaluate_run(truths, preds, vocab, propagate_errors);
    if (!report_path.empty()) {
        detail::write_atomic(report_path, [&](const std::string& p) {
            std::ofstream out(p, std::ios::binary);
            if (!out) raise(Errc::io_error, "cannot write " + p);
            write_report(out, ids, truths, preds, summary);
            if (!out) raise(Errc::io_error, "short write to " + p);
        });
    }
    console << summary_line(summary) << "\n";
    return summary;
}

// ---------------------------------------------------------------------- bench

struct BenchArm {
    std::string name;
    std::size_t dims = 0;
    double preprocess_s = 0.0;
    double train_s = 0.0;
    double query_ms = 0.0; // mean fold+extract+predict latency per image
    double accuracy = 0.0;
    double error_total = 0.0;
    double error_mean = 0.0;
    std::size_t feature_bytes = 0;
    std::size_t model_bytes = 0;
    std::size_t sv_total = 0;
};

struct BenchReport {
    int grid = 4;
    int threads = 1;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    std::size_t n_classes = 0;
    BenchArm folded;
    BenchArm unfolded;
    double total_s = 0.0;

    double dim_reduction_pct() const {
        return 100.0 * (1.0 - static_cast<double>(folded.dims) / static_cast<double>(unfolded.dims));
    }
    double accuracy_gap_pp() const { return std::abs(folded.accuracy - unfolded.accuracy) * 100.0; }
    double query_speedup_pct() const {
        return 100.0 * (1.0 - folded.query_ms / unfolded.query_ms);
    }
};

namespace detail {

inline BenchArm bench_arm(const std::string& name, const std::string& manifest_path,
                          const std::string& out_dir, const PipelineConfig& cfg,
                          const PositionVocabulary& vocab, std::ostream& console) {
    BenchArm arm;
    arm.name = name;

    Stopwatch sw;
    run_preprocess(manifest_path, out_dir, cfg, console);
    arm.preprocess_s = sw.seconds();
    sw.reset();
    run_train(out_dir, cfg, console);
    arm.train_s = sw.seconds();

    const ArtifactPaths paths(out_dir);
    const MultiClassModel model = load_model(paths.model());
    arm.dims = model.dims;
    for (const auto& bin : model.binaries) arm.sv_total += bin.sv_count();
    arm.model_bytes = arm.sv_total * (model.dims + 1) * sizeof(double);
    {
        const SampleSet set = load_features(paths.features());
        arm.feature_bytes = set.rows() * set.dims * sizeof(double);
    }

    FoldingPlan plan;
    const FoldingPlan* plan_ptr = nullptr;
    if (cfg.fold_mode != "off") {
        plan = load_plan(paths.plan());
        plan_ptr = &plan;
    }
    const LbpParams lbp = effective_lbp(cfg);

    const DatasetManifest manifest = read_manifest(manifest_path);
    const auto test = manifest.split_entries(Split::test);
    if (test.empty()) raise(Errc::empty_input, manifest_path + " has no test images");

    // images preloaded so the per-query clock covers fold+extract+predict only
    std::vector<GrayImage> images;
    images.reserve(test.size());
    for (const auto* e : test) {
        images.push_back(load_image(e->path));
        require_min_dims(images.back(), e->path);
    }

    std::vector<IrmaCode> truths, preds;
    std::ostringstream lines;
    double query_s = 0.0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        Stopwatch q;
        const std::vector<double> features =
            fold_and_extract(images[i], plan_ptr, cfg.superpose, lbp);
        const int pred = predict(model, features.data(), features.size());
        query_s += q.seconds();
        const std::string& code = model.class_names[static_cast<std::size_t>(pred)];
        lines << test[i]->path << "\t" << code << "\n";
        truths.push_back(test[i]->code);
        preds.push_back(parse_code(code));
        if (preds.back() == truths.back()) ++correct;
    }
    write_atomic(paths.predictions(), [&](const std::string& p) {
        std::ofstream out(p, std::ios::binary);
        if (!out) raise(Errc::io_error, "cannot write " + p);
        out << lines.str();
        if (!out) raise(Errc::io_error, "short write to " + p);
    });

    arm.query_ms = query_s * 1e3 / static_cast<double>(test.size());
    arm.accuracy = static_cast<double>(correct) / static_cast<double>(test.size());
    const RunSummary summary = evaluate_run(truths, preds, vocab);
    arm.error_total = summary.sum;
    arm.error_mean = summary.mean;
    return arm;
}

} // namespace detail

inline void write_bench_summary(const BenchReport& r, std::ostream& os) {
    auto kv = [&](const std::string& k, const std::string& v) { os << k << "=" << v << "\n"; };
    kv("grid", std::to_string(r.grid));
    kv("threads", std::to_string(r.threads));
    kv("n_train", std::to_string(r.n_train));
    kv("n_test", std::to_string(r.n_test));
    kv("n_classes", std::to_string(r.n_classes));
    kv("folded_dims", std::to_string(r.folded.dims));
    kv("unfolded_dims", std::to_string(r.unfolded.dims));
    kv("dim_reduction_pct", fmt_double(r.dim_reduction_pct()));
    kv("folded_accuracy", fmt_double(r.folded.accuracy));
    kv("unfolded_accuracy", fmt_double(r.unfolded.accuracy));
    kv("accuracy_gap_pp", fmt_double(r.accuracy_gap_pp()));
    kv("folded_error_total", fmt_double(r.folded.error_total));
    kv("folded_error_mean", fmt_double(r.folded.error_mean));
    kv("unfolded_error_total", fmt_double(r.unfolded.error_total));
    kv("unfolded_error_mean", fmt_double(r.unfolded.error_mean));
    kv("folded_query_ms", fmt_double(r.folded.query_ms));
    kv("unfolded_query_ms", fmt_double(r.unfolded.query_ms));
    kv("query_speedup_pct", fmt_double(r.query_speedup_pct()));
    kv("folded_preprocess_s", fmt_double(r.folded.preprocess_s));
    kv("unfolded_preprocess_s", fmt_double(r.unfolded.preprocess_s));
    kv("folded_train_s", fmt_double(r.folded.train_s));
    kv("unfolded_train_s", fmt_double(r.unfolded.train_s));
    kv("folded_feature_bytes", std::to_string(r.folded.feature_bytes));
    kv("unfolded_feature_bytes", std::to_string(r.unfolded.feature_bytes));
    kv("folded_model_bytes", std::to_string(r.folded.model_bytes));
    kv("unfolded_model_bytes", std::to_string(r.unfolded.model_bytes));
    kv("folded_sv_total", std::to_string(r.folded.sv_total));
    kv("unfolded_sv_total", std::to_string(r.unfolded.sv_total));
    kv("total_s", fmt_double(r.total_s));
}

inline void print_bench_table(const BenchReport& r, std::ostream& os) {
    os << "\nbenchmark (" << r.n_train << " train / " << r.n_test << " test, " << r.n_classes
       << " classes, " << r.threads << " thread" << (r.threads == 1 ? "" : "s") << ")\n";
    os << std::left << std::setw(12) << "arm" << std::right << std::setw(8) << "dims"
       << std::setw(12) << "accuracy" << std::setw(12) << "error" << std::setw(12)
       << "query ms" << std::setw(14) << "features MB" << std::setw(12) << "model MB" << "\n";
    auto row = [&](const BenchArm& a) {
        os << std::left << std::setw(12) << a.name << std::right << std::setw(8) << a.dims
           << std::setw(12) << std::fixed << std::setprecision(4) << a.accuracy << std::setw(12)
           << std::setprecision(2) << a.error_total << std::setw(12) << std::setprecision(3)
           << a.query_ms << std::setw(14) << std::setprecision(2)
           << static_cast<double>(a.feature_bytes) / (1 << 20) << std::setw(12)
           << static_cast<double>(a.model_bytes) / (1 << 20) << "\n";
    };
    row(r.folded);
    row(r.unfolded);
    os << std::setprecision(2);
    os << "dimension reduction " << r.dim_reduction_pct() << "%, query speedup "
       << r.query_speedup_pct() << "%, accuracy gap " << r.accuracy_gap_pp() << " pp\n";
    os << "\nreported results on the IRMA 2009 benchmark (12677 train / 1733 test, 193"
          " classes), for context:\n";
    os << "  folded 3x3     error 153.07   query 30 ms\n";
    os << "  unfolded 4x4   error 146.55   query 53 ms\n";
    os << "  TAU biomed     error 169.50\n";
    os << "  VPA SabanciU   error 261.20\n";
}

/// Runs both arms (saliency-folded vs unfolded) end to end on one manifest
/// and reports the accuracy/latency/memory trade-off.
inline BenchReport run_bench(const std::string& manifest_path, const std::string& out_dir,
                             const PipelineConfig& cfg, std::ostream& console) {
    validate_config(cfg);
    Stopwatch total;
    const DatasetManifest manifest = read_manifest(manifest_path);
    std::vector<IrmaCode> train_codes;
    for (const auto& e : manifest.entries)
        if (e.split == Split::train) train_codes.push_back(e.code);
    if (train_codes.empty()) raise(Errc::empty_input, manifest_path + " has no train images");
    const PositionVocabulary vocab = build_vocabulary(train_codes);

    BenchReport report;
    report.grid = cfg.grid;
    report.threads = cfg.threads;
    report.n_train = train_codes.size();
    report.n_test = manifest.split_entries(Split::test).size();
    report.n_classes = manifest.class_table().size();

    PipelineConfig folded_cfg = cfg;
    if (folded_cfg.fold_mode == "off") folded_cfg.fold_mode = "saliency";
    PipelineConfig unfolded_cfg = cfg;
    unfolded_cfg.fold_mode = "off";

    const ArtifactPaths paths(out_dir);
    std::filesystem::create_directories(paths.dir);
    report.folded = detail::bench_arm("folded", manifest_path,
                                      (paths.dir / "folded_arm").string(), folded_cfg, vocab,
                                      console);
    report.unfolded = detail::bench_arm("unfolded", manifest_path,
                                        (paths.dir / "unfolded_arm").string(), unfolded_cfg,
                                        vocab, console);
    report.total_s = total.seconds();

    detail::write_atomic(paths.bench_summary(), [&](const std::string& p) {
        std::ofstream out(p, std::ios::binary);
        if (!out) raise(Errc::io_error, "cannot write " + p);
        write_bench_summary(report, out);
        if (!out) raise(Errc::io_error, "short write to " + p);
    });
    print_bench_table(report, console);
    return report;
}

} // namespace salfold

#endif
