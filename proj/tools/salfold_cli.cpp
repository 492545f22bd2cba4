// Command-line front end: synth, preprocess, train, classify, evaluate, bench.
// Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.

#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "salfold/salfold.hpp"

namespace {

struct SharedFlags {
    std::string config_path;
    int threads = 0;
    std::string seed;
    std::string fold;
    int grid = 0;

    CLI::App* app = nullptr;

    void attach(CLI::App* sub) {
        app = sub;
        sub->add_option("--config", config_path, "key = value configuration file");
        sub->add_option("--threads", threads, "worker threads (default 1)");
        sub->add_option("--seed", seed, "seed for synthetic data generation");
        sub->add_option("--fold", fold, "folding mode: saliency, fixed or off")
            ->check(CLI::IsMember({"saliency", "fixed", "off"}));
        sub->add_option("--grid", grid, "base block grid size (default 4)");
    }

    salfold::PipelineConfig build() const {
        salfold::PipelineConfig cfg;
        if (!config_path.empty()) cfg = salfold::load_config_file(config_path, cfg);
        if (app->count("--threads")) salfold::apply_config_entry(cfg, "threads", std::to_string(threads));
        if (app->count("--seed")) salfold::apply_config_entry(cfg, "seed", seed);
        if (app->count("--fold")) salfold::apply_config_entry(cfg, "fold", fold);
        if (app->count("--grid")) salfold::apply_config_entry(cfg, "grid", std::to_string(grid));
        return cfg;
    }
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"saliency-guided image folding for compact texture classification"};
    app.require_subcommand(1);

    SharedFlags synth_flags, pre_flags, train_flags, cls_flags, eval_flags, bench_flags;

    auto* synth = app.add_subcommand("synth", "generate the synthetic striped-disc corpus");
    std::string synth_out;
    int synth_classes = 0, synth_train = -1, synth_test = -1, synth_size = 0;
    double synth_noise = -1.0;
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--classes", synth_classes, "number of classes");
    synth->add_option("--train-per-class", synth_train, "training images per class");
    synth->add_option("--test-per-class", synth_test, "test images per class");
    synth->add_option("--size", synth_size, "square image size in pixels");
    synth->add_option("--noise", synth_noise, "uniform noise amplitude in [0, 1]");
    synth_flags.attach(synth);

    auto* pre = app.add_subcommand("preprocess",
                                   "build saliency template, folding plan and train features");
    std::string pre_manifest, pre_out;
    pre->add_option("--manifest", pre_manifest, "dataset manifest")->required();
    pre->add_option("--out", pre_out, "artifact directory")->required();
    pre_flags.attach(pre);

    auto* train = app.add_subcommand("train", "train the one-vs-one classifier");
    std::string train_out;
    train->add_option("--out", train_out, "artifact directory")->required();
    train_flags.attach(train);

    auto* cls = app.add_subcommand("classify", "predict codes for the manifest's test split");
    std::string cls_manifest, cls_out, cls_predictions;
    cls->add_option("--manifest", cls_manifest, "dataset manifest")->required();
    cls->add_option("--out", cls_out, "artifact directory")->required();
    cls->add_option("--predictions", cls_predictions,
                    "output prediction file (default <out>/predictions.tsv)");
    cls_flags.attach(cls);

    auto* eval = app.add_subcommand("evaluate", "score predictions with the hierarchical error");
    std::string eval_manifest, eval_predictions, eval_report;
    bool eval_propagate = false;
    eval->add_option("--manifest", eval_manifest, "dataset manifest")->required();
    eval->add_option("--predictions", eval_predictions, "prediction file")->required();
    eval->add_option("--report", eval_report, "write a per-image report here");
    eval->add_flag("--propagate-errors", eval_propagate,
                   "a wrong position makes deeper positions of that axis count as wrong");
    eval_flags.attach(eval);

    auto* bench = app.add_subcommand("bench", "run the folded vs unfolded comparison");
    std::string bench_manifest, bench_out;
    bench->add_option("--manifest", bench_manifest, "dataset manifest")->required();
    bench->add_option("--out", bench_out, "artifact directory")->required();
    bench_flags.attach(bench);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (synth->parsed()) {
            salfold::PipelineConfig cfg = synth_flags.build();
            if (synth->count("--classes")) cfg.synth.classes = synth_classes;
            if (synth->count("--train-per-class")) cfg.synth.train_per_class = synth_train;
            if (synth->count("--test-per-class")) cfg.synth.test_per_class = synth_test;
            if (synth->count("--size")) cfg.synth.image_size = synth_size;
            if (synth->count("--noise")) cfg.synth.noise = synth_noise;
            salfold::run_synth(synth_out, cfg, std::cout);
        } else if (pre->parsed()) {
            salfold::run_preprocess(pre_manifest, pre_out, pre_flags.build(), std::cout);
        } else if (train->parsed()) {
            salfold::run_train(train_out, train_flags.build(), std::cout);
        } else if (cls->parsed()) {
            if (cls_predictions.empty())
                cls_predictions = salfold::ArtifactPaths(cls_out).predictions();
            salfold::run_classify(cls_manifest, cls_out, cls_predictions, cls_flags.build(),
                                  std::cout);
        } else if (eval->parsed()) {
            salfold::run_evaluate(eval_manifest, eval_predictions, eval_report, eval_propagate,
                                  std::cout);
        } else if (bench->parsed()) {
            salfold::run_bench(bench_manifest, bench_out, bench_flags.build(), std::cout);
        }
    } catch (const salfold::Error& e) {
        std::cerr << "salfold: error: " << e.what() << "\n";
        return static_cast<int>(salfold::category(e.code()));
    } catch (const std::exception& e) {
        std::cerr << "salfold: internal error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
