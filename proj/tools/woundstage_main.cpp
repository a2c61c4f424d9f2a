#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "woundstage/datapipe.hpp"
#include "woundstage/errors.hpp"
#include "woundstage/explain.hpp"
#include "woundstage/fiberquant.hpp"
#include "woundstage/model.hpp"
#include "woundstage/synth.hpp"
#include "woundstage/trainer.hpp"

namespace ws = woundstage;
namespace fs = std::filesystem;

namespace {

std::vector<int> parse_int_list(const std::string& text, std::size_t expect, const char* what) {
    std::vector<int> out;
    std::string cur;
    auto flush = [&] {
        if (cur.empty()) throw ws::UsageError(std::string(what) + ": empty entry in '" + text + "'");
        try {
            std::size_t used = 0;
            out.push_back(std::stoi(cur, &used));
            if (used != cur.size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw ws::UsageError(std::string(what) + ": bad integer '" + cur + "'");
        }
        cur.clear();
    };
    for (char c : text) {
        if (c == ',')
            flush();
        else if (!std::isspace(static_cast<unsigned char>(c)))
            cur += c;
    }
    flush();
    if (expect != 0 && out.size() != expect)
        throw ws::UsageError(std::string(what) + ": expected " + std::to_string(expect) +
                             " comma-separated values, got " + std::to_string(out.size()));
    return out;
}

// derived manifests must stay loadable from anywhere, so paths are made
// absolute against the source manifest's directory
ws::Manifest rebase_absolute(const ws::Manifest& m, const fs::path& base) {
    ws::Manifest out = m;
    for (auto& s : out.samples) {
        fs::path p(s.image_path);
        if (p.is_relative()) p = base / p;
        s.image_path = fs::absolute(p).lexically_normal().string();
    }
    return out;
}

void print_class_counts(const char* tag, const ws::Manifest& m) {
    auto counts = m.class_counts();
    std::cout << tag << ": " << m.samples.size() << " samples (";
    for (int c = 0; c < ws::kNumStages; ++c) {
        if (c) std::cout << ' ';
        std::cout << ws::stage_name(static_cast<ws::StageLabel>(c)) << '='
                  << counts[static_cast<std::size_t>(c)];
    }
    std::cout << ")\n";
}

struct SynthArgs {
    std::string out;
    std::string task = "target";
    int per_class = 60;
    std::string counts;
    int image_size = 96;
    std::uint64_t seed = 1;
};

void run_synth(const SynthArgs& a) {
    ws::SynthConfig cfg;
    cfg.task = a.task == "source" ? ws::SynthTask::source : ws::SynthTask::target;
    cfg.per_class = a.per_class;
    if (!a.counts.empty()) cfg.counts = parse_int_list(a.counts, ws::kNumStages, "--counts");
    cfg.image_size = a.image_size;
    cfg.seed = a.seed;
    fs::path out_dir(a.out);
    ws::Manifest manifest = ws::synthesize_dataset(cfg, out_dir);
    ws::save_manifest(manifest, out_dir / "manifest.csv");
    print_class_counts("generated", manifest);
    std::cout << "manifest: " << (out_dir / "manifest.csv").string() << '\n';
}

struct PrepareArgs {
    std::string manifest;
    std::string out;
    std::string ratios = "6,2,2";
    std::uint64_t seed = 7;
    bool augment = true;
    bool oversample = true;
};

void run_prepare(const PrepareArgs& a) {
    fs::path src(a.manifest);
    ws::Manifest manifest = ws::load_manifest(src);
    if (manifest.samples.empty()) throw ws::DataError("manifest has no samples: " + a.manifest);
    auto ratios_v = parse_int_list(a.ratios, 3, "--ratios");
    std::array<int, 3> ratios{ratios_v[0], ratios_v[1], ratios_v[2]};

    fs::path out_dir(a.out);
    fs::create_directories(out_dir);
    fs::path base = fs::absolute(src).parent_path();

    ws::SplitResult split = ws::stratified_split(manifest, ratios, a.seed);
    ws::Manifest train = rebase_absolute(split.train, base);
    ws::Manifest val = rebase_absolute(split.validation, base);
    ws::Manifest test = rebase_absolute(split.test, base);
    ws::save_manifest(train, out_dir / "train.csv");
    ws::save_manifest(val, out_dir / "val.csv");
    ws::save_manifest(test, out_dir / "test.csv");
    print_class_counts("train", train);
    print_class_counts("val", val);
    print_class_counts("test", test);

    ws::Manifest augmented;
    if (a.augment) {
        fs::path aug_dir = out_dir / "aug";
        for (const auto& s : train.samples) {
            ws::ImageU8 img = ws::read_png(s.image_path);
            std::vector<ws::ImageU8> variants = ws::augment12(img);
            fs::path cls_dir = aug_dir / ws::stage_name(s.label);
            fs::create_directories(cls_dir);
            std::string stem = fs::path(s.image_path).stem().string();
            for (std::size_t k = 0; k < variants.size(); ++k) {
                char name[256];
                std::snprintf(name, sizeof name, "%s_a%02zu.png", stem.c_str(), k);
                fs::path p = cls_dir / name;
                ws::write_png(p, variants[k]);
                augmented.samples.push_back(
                    ws::Sample{fs::absolute(p).lexically_normal().string(), s.label, s.dataset_id});
            }
        }
        print_class_counts("augmented", augmented);
    } else {
        augmented = train;
    }

    ws::Manifest balanced;
    if (a.oversample) {
        std::vector<std::vector<ws::Sample>> per_class(ws::kNumStages);
        for (const auto& s : augmented.samples)
            per_class[static_cast<std::size_t>(s.label)].push_back(s);
        std::uint64_t os_seed = ws::Rng(a.seed).fork(17).next_u64();
        auto balanced_lists = ws::oversample_balance(per_class, os_seed);
        for (const auto& cls : balanced_lists)
            for (const auto& s : cls) balanced.samples.push_back(s);
        print_class_counts("balanced", balanced);
    } else {
        balanced = augmented;
    }
    ws::save_manifest(balanced, out_dir / "train_balanced.csv");

    nlohmann::json summary;
    auto counts_json = [](const ws::Manifest& m) {
        nlohmann::json j = nlohmann::json::array();
        for (int c : m.class_counts()) j.push_back(c);
        return j;
    };
    summary["seed"] = a.seed;
    summary["ratios"] = ratios_v;
    summary["train"] = counts_json(train);
    summary["val"] = counts_json(val);
    summary["test"] = counts_json(test);
    summary["train_augmented"] = counts_json(augmented);
    summary["train_balanced"] = counts_json(balanced);
    std::ofstream js(out_dir / "summary.json", std::ios::trunc);
    js << summary.dump(2) << '\n';
}

struct TrainArgs {
    std::string train_manifest;
    std::string val_manifest;
    std::string out;
    std::string preset = "vgg_tiny";
    int input_size = 0;
    int classes = 6;
    int epochs = 40;
    double lr = 1e-4;
    int batch = 16;
    std::uint64_t seed = 3;
    std::string optimizer = "adam";
    std::string init;
    int freeze_blocks = -2;  // -2: not set; -1: default freeze depth
    bool preset_set = false;
    bool input_size_set = false;
};

void run_train(const TrainArgs& a) {
    ws::ModelGraph<float> model;
    if (!a.init.empty()) {
        model = ws::load_checkpoint(a.init);
        if (a.preset_set && ws::preset_from_name(a.preset) != model.config.preset)
            throw ws::UsageError("--preset conflicts with the checkpoint (" +
                                 ws::preset_name(model.config.preset) + ")");
        if (a.input_size_set && a.input_size != ws::resolved_input_size(model.config))
            throw ws::UsageError("--input-size conflicts with the checkpoint (" +
                                 std::to_string(ws::resolved_input_size(model.config)) + ")");
        int freeze = a.freeze_blocks == -2 ? -1 : a.freeze_blocks;
        ws::finetune_surgery(model, freeze, a.classes, a.seed);
        std::cout << "loaded " << a.init << ", froze " << (freeze < 0 ? model.conv_block_count() - 1 : freeze)
                  << " of " << model.conv_block_count() << " conv blocks, new " << a.classes
                  << "-way head\n";
    } else {
        ws::ModelConfig cfg;
        cfg.preset = ws::preset_from_name(a.preset);
        cfg.input_size = a.input_size;
        cfg.num_classes = a.classes;
        model = ws::build_model<float>(cfg, a.seed);
        if (a.freeze_blocks > -2) ws::finetune_surgery(model, a.freeze_blocks, a.classes, a.seed);
    }

    int input = ws::resolved_input_size(model.config);
    fs::path train_p(a.train_manifest), val_p(a.val_manifest);
    ws::Manifest train_m = ws::load_manifest(train_p);
    ws::Manifest val_m = ws::load_manifest(val_p);
    ws::Dataset train_ds =
        ws::load_dataset(train_m, input, {}, fs::absolute(train_p).parent_path());
    ws::Dataset val_ds = ws::load_dataset(val_m, input, {}, fs::absolute(val_p).parent_path());

    ws::HyperParams hp;
    hp.learning_rate = a.lr;
    hp.epochs = a.epochs;
    hp.batch_size = a.batch;
    hp.seed = a.seed;
    if (a.optimizer == "adam")
        hp.optimizer = ws::OptimKind::adam;
    else if (a.optimizer == "sgd")
        hp.optimizer = ws::OptimKind::sgd;
    else
        throw ws::UsageError("--optimizer must be adam or sgd");

    ws::History history = ws::train_model(model, train_ds, val_ds, hp);

    fs::path out_dir(a.out);
    fs::create_directories(out_dir);
    ws::save_checkpoint(model, out_dir / "best.ckpt");
    ws::save_history_csv(history, out_dir / "history.csv");

    double best_acc = 0;
    for (const auto& r : history.records) best_acc = std::max(best_acc, r.val_acc);
    std::cout << std::fixed << std::setprecision(4);
    if (!history.records.empty()) {
        const auto& last = history.records.back();
        std::cout << "epoch " << last.epoch << ": train_loss=" << last.train_loss
                  << " train_acc=" << last.train_acc << " val_acc=" << last.val_acc
                  << " val_auc=" << last.val_auc << '\n';
    }
    std::cout << "best val_acc " << best_acc << "; saved " << (out_dir / "best.ckpt").string()
              << '\n';
}

struct EvalArgs {
    std::string ckpt;
    std::string data;
    std::string out;
};

void run_eval(const EvalArgs& a) {
    ws::ModelGraph<float> model = ws::load_checkpoint(a.ckpt);
    fs::path data_p(a.data);
    ws::Manifest m = ws::load_manifest(data_p);
    ws::Dataset ds = ws::load_dataset(m, ws::resolved_input_size(model.config), {},
                                      fs::absolute(data_p).parent_path());
    ws::EvalReport report = ws::evaluate(model, ds);
    if (!a.out.empty()) {
        fs::create_directories(a.out);
        ws::save_eval_report(report, fs::path(a.out) / "report.json");
        std::cout << "report: " << (fs::path(a.out) / "report.json").string() << '\n';
    }
    std::cout << std::fixed << std::setprecision(4);
    std::cout << "samples " << report.total << ", overall_acc " << report.overall_acc
              << ", mean_class_acc " << report.mean_class_acc << ", macro_auc " << report.macro_auc
              << '\n';
    for (int c = 0; c < report.num_classes; ++c) {
        std::string name = report.num_classes == ws::kNumStages
                               ? ws::stage_name(static_cast<ws::StageLabel>(c))
                               : "class_" + std::to_string(c);
        std::cout << "  " << name << ": ";
        if (report.per_class_acc[static_cast<std::size_t>(c)])
            std::cout << *report.per_class_acc[static_cast<std::size_t>(c)];
        else
            std::cout << "absent";
        std::cout << '\n';
    }
}

struct ExplainArgs {
    std::string ckpt;
    std::vector<std::string> images;
    std::string out;
    int cls = -1;
    int layer = -1;
    double alpha = 0.45;
};

void run_explain(const ExplainArgs& a) {
    ws::ModelGraph<float> model = ws::load_checkpoint(a.ckpt);
    int input = ws::resolved_input_size(model.config);
    fs::path out_dir(a.out);
    fs::create_directories(out_dir);

    for (const auto& image_path : a.images) {
        ws::ImageU8 original = ws::read_png(image_path);
        ws::ImageU8 resized = ws::resize_bilinear(original, input, input);
        std::vector<float> chw = ws::normalize_chw<float>(resized);

        ws::ActivationMap map = ws::layercam(model, chw, a.cls, a.layer);
        std::vector<double> guided = ws::guided_backprop(model, chw, map.class_id);
        ws::SaliencyImage saliency = ws::fuse_saliency(map, guided, input, input);
        ws::ImageU8 overlay = ws::render_overlay(resized, saliency, a.alpha);

        std::string stem = fs::path(image_path).stem().string();
        char suffix[64];
        std::snprintf(suffix, sizeof suffix, "_class%d_layer%d", map.class_id, map.layer_id);
        fs::path map_csv = out_dir / (stem + suffix + "_map.csv");
        fs::path sal_png = out_dir / (stem + suffix + "_saliency.png");
        fs::path over_png = out_dir / (stem + suffix + "_overlay.png");

        std::ofstream mc(map_csv, std::ios::trunc);
        mc << std::setprecision(9);
        for (int y = 0; y < map.height; ++y) {
            for (int x = 0; x < map.width; ++x) {
                if (x) mc << ',';
                mc << map.values[static_cast<std::size_t>(y) * map.width + x];
            }
            mc << '\n';
        }
        ws::write_png(sal_png, ws::render_grayscale(saliency.values, saliency.width, saliency.height));
        ws::write_png(over_png, overlay);

        std::vector<float> logits = model.infer_logits(chw);
        std::vector<float> probs = ws::softmax(logits);
        std::cout << image_path << ": class " << map.class_id;
        if (model.config.num_classes == ws::kNumStages)
            std::cout << " (" << ws::stage_name(static_cast<ws::StageLabel>(map.class_id)) << ")";
        std::cout << " p=" << std::fixed << std::setprecision(4)
                  << probs[static_cast<std::size_t>(map.class_id)] << " layer " << map.layer_id
                  << " -> " << over_png.string() << '\n';
        std::cout.unsetf(std::ios_base::floatfield);
    }
}

struct CoherencyArgs {
    std::string manifest;
    std::string out;
    double sigma = 2.0;
    double hue_lo = 150.0, hue_hi = 270.0;
    double sat_min = 0.15, val_min = 0.10;
};

void run_coherency(const CoherencyArgs& a) {
    fs::path src(a.manifest);
    ws::Manifest manifest = ws::load_manifest(src);
    if (manifest.samples.empty()) throw ws::DataError("manifest has no samples: " + a.manifest);
    fs::path base = fs::absolute(src).parent_path();
    fs::path out_dir(a.out);
    fs::create_directories(out_dir);

    ws::MaskParams params;
    params.hue_lo = a.hue_lo;
    params.hue_hi = a.hue_hi;
    params.sat_min = a.sat_min;
    params.val_min = a.val_min;

    fs::path csv = out_dir / "coherency.csv";
    std::ofstream out(csv, std::ios::trunc);
    if (!out) throw ws::DataError("cannot write " + csv.string());
    out << "path,label,dataset_id,coverage,coherency\n" << std::setprecision(9);
    for (const auto& s : manifest.samples) {
        fs::path p(s.image_path);
        if (p.is_relative()) p = base / p;
        ws::ImageU8 img = ws::read_png(p);
        ws::CollagenMask mask = ws::collagen_mask(img, params);
        if (mask.selected == 0)
            throw ws::DataError("no pixels pass the collagen mask in " + p.string());
        std::vector<double> luma = ws::luminance_plane(img);
        double c = ws::coherency(luma, img.width, img.height, &mask.mask, a.sigma);
        out << s.image_path << ',' << ws::stage_name(s.label) << ',' << s.dataset_id << ','
            << mask.coverage() << ',' << c << '\n';
    }
    std::cout << "coherency for " << manifest.samples.size() << " images -> " << csv.string()
              << '\n';
}

struct StatsArgs {
    std::string coherency_csv;
    std::string out;
};

void run_stats(const StatsArgs& a) {
    std::ifstream in(a.coherency_csv);
    if (!in) throw ws::DataError("cannot open " + a.coherency_csv);
    std::string line;
    if (!std::getline(in, line) ||
        (line != "path,label,dataset_id,coverage,coherency" &&
         line != "path,label,dataset_id,coverage,coherency\r"))
        throw ws::DataError(a.coherency_csv + " is not a coherency table");

    std::map<int, std::vector<double>> by_class;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::string cur;
        for (char c : line) {
            if (c == ',') {
                fields.push_back(cur);
                cur.clear();
            } else
                cur += c;
        }
        fields.push_back(cur);
        if (fields.size() != 5)
            throw ws::DataError(a.coherency_csv + " line " + std::to_string(lineno) +
                                ": expected 5 fields");
        auto label = ws::stage_from_name(fields[1]);
        if (!label)
            throw ws::DataError(a.coherency_csv + " line " + std::to_string(lineno) +
                                ": unknown label '" + fields[1] + "'");
        try {
            by_class[static_cast<int>(*label)].push_back(std::stod(fields[4]));
        } catch (const std::exception&) {
            throw ws::DataError(a.coherency_csv + " line " + std::to_string(lineno) +
                                ": bad coherency value '" + fields[4] + "'");
        }
    }

    std::vector<std::string> names;
    std::vector<std::vector<double>> groups;
    for (const auto& [cls, values] : by_class) {
        if (values.size() < 2) {
            std::cerr << "skipping " << ws::stage_name(static_cast<ws::StageLabel>(cls))
                      << ": fewer than 2 values\n";
            continue;
        }
        names.push_back(ws::stage_name(static_cast<ws::StageLabel>(cls)));
        groups.push_back(values);
    }
    if (groups.size() < 2) throw ws::DataError("need at least two groups with 2+ values");

    fs::path out_dir(a.out);
    fs::create_directories(out_dir);

    fs::path stats_csv = out_dir / "group_stats.csv";
    std::ofstream gs(stats_csv, std::ios::trunc);
    gs << "label,count,mean,median,q1,q3,whisker_low,whisker_high\n" << std::setprecision(9);
    for (std::size_t i = 0; i < groups.size(); ++i) {
        ws::GroupStats g = ws::group_stats(groups[i]);
        gs << names[i] << ',' << g.count << ',' << g.mean << ',' << g.median << ',' << g.q1 << ','
           << g.q3 << ',' << g.whisker_low << ',' << g.whisker_high << '\n';
    }

    ws::PValueMatrix matrix = ws::pvalue_matrix(names, groups);
    ws::save_pvalue_csv(matrix, out_dir / "pvalues.csv");

    std::cout << "group stats -> " << stats_csv.string() << '\n';
    std::cout << "pairwise p-values -> " << (out_dir / "pvalues.csv").string() << '\n';
    for (std::size_t i = 0; i < groups.size(); ++i) {
        ws::GroupStats g = ws::group_stats(groups[i]);
        std::cout << "  " << names[i] << ": n=" << g.count << " mean=" << std::fixed
                  << std::setprecision(4) << g.mean << '\n';
        std::cout.unsetf(std::ios_base::floatfield);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"wound healing stage analysis toolkit"};
    app.require_subcommand(1);
    app.set_config("--config", "", "read defaults from an INI file (sections per subcommand)");

    SynthArgs synth_args;
    auto* synth = app.add_subcommand("synth", "generate a synthetic stained-tissue dataset");
    synth->add_option("--out", synth_args.out, "output directory")->required();
    synth->add_option("--task", synth_args.task, "target or source")
        ->check(CLI::IsMember({"target", "source"}));
    synth->add_option("--per-class", synth_args.per_class, "images per class")
        ->check(CLI::PositiveNumber);
    synth->add_option("--counts", synth_args.counts, "per-class counts, e.g. 72,12,15,31,110,66");
    synth->add_option("--image-size", synth_args.image_size, "square image size")
        ->check(CLI::Range(8, 4096));
    synth->add_option("--seed", synth_args.seed, "generator seed");
    synth->callback([&] { run_synth(synth_args); });

    PrepareArgs prep_args;
    auto* prep = app.add_subcommand("prepare", "split, augment and balance a dataset");
    prep->add_option("--manifest", prep_args.manifest, "input manifest CSV")
        ->required()
        ->check(CLI::ExistingFile);
    prep->add_option("--out", prep_args.out, "output directory")->required();
    prep->add_option("--ratios", prep_args.ratios, "train,val,test integer ratios");
    prep->add_option("--seed", prep_args.seed, "split/oversample seed");
    prep->add_flag("--augment,!--no-augment", prep_args.augment,
                   "write the 12 dihedral variants of every training image");
    prep->add_flag("--oversample,!--no-oversample", prep_args.oversample,
                   "balance training classes by resampling");
    prep->callback([&] { run_prepare(prep_args); });

    TrainArgs train_args;
    auto* train = app.add_subcommand("train", "train or fine-tune a classifier");
    train->add_option("--train", train_args.train_manifest, "training manifest")
        ->required()
        ->check(CLI::ExistingFile);
    train->add_option("--val", train_args.val_manifest, "validation manifest")
        ->required()
        ->check(CLI::ExistingFile);
    train->add_option("--out", train_args.out, "output directory")->required();
    auto* preset_opt = train->add_option("--preset", train_args.preset, "vgg_tiny or vgg16_shape")
                           ->check(CLI::IsMember({"vgg_tiny", "vgg16_shape"}));
    auto* isz_opt = train->add_option("--input-size", train_args.input_size,
                                      "square input resolution (0 = preset default)");
    train->add_option("--classes", train_args.classes, "number of output classes")
        ->check(CLI::Range(2, 1000));
    train->add_option("--epochs", train_args.epochs, "training epochs")->check(CLI::Range(0, 100000));
    train->add_option("--lr", train_args.lr, "learning rate")->check(CLI::PositiveNumber);
    train->add_option("--batch", train_args.batch, "batch size")->check(CLI::PositiveNumber);
    train->add_option("--seed", train_args.seed, "training seed");
    train->add_option("--optimizer", train_args.optimizer, "adam or sgd")
        ->check(CLI::IsMember({"adam", "sgd"}));
    train->add_option("--init", train_args.init, "checkpoint to fine-tune from")
        ->check(CLI::ExistingFile);
    train->add_option("--freeze-blocks", train_args.freeze_blocks,
                      "conv blocks to freeze (-1 = all but last)");
    train->callback([&] {
        train_args.preset_set = preset_opt->count() > 0;
        train_args.input_size_set = isz_opt->count() > 0;
        run_train(train_args);
    });

    EvalArgs eval_args;
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a manifest");
    eval->add_option("--ckpt", eval_args.ckpt, "checkpoint file")->required()->check(CLI::ExistingFile);
    eval->add_option("--data", eval_args.data, "evaluation manifest")
        ->required()
        ->check(CLI::ExistingFile);
    eval->add_option("--out", eval_args.out, "directory for report.json");
    eval->callback([&] { run_eval(eval_args); });

    ExplainArgs explain_args;
    auto* explain = app.add_subcommand("explain", "class evidence maps for images");
    explain->add_option("--ckpt", explain_args.ckpt, "checkpoint file")
        ->required()
        ->check(CLI::ExistingFile);
    explain->add_option("--image", explain_args.images, "input image (repeatable)")
        ->required()
        ->check(CLI::ExistingFile);
    explain->add_option("--out", explain_args.out, "output directory")->required();
    explain->add_option("--class", explain_args.cls, "class to explain (-1 = predicted)");
    explain->add_option("--layer", explain_args.layer, "layer index (-1 = last conv)");
    explain->add_option("--alpha", explain_args.alpha, "overlay blend weight")
        ->check(CLI::Range(0.0, 1.0));
    explain->callback([&] { run_explain(explain_args); });

    CoherencyArgs coh_args;
    auto* coh = app.add_subcommand("coherency", "collagen orientation coherency per image");
    coh->add_option("--manifest", coh_args.manifest, "input manifest CSV")
        ->required()
        ->check(CLI::ExistingFile);
    coh->add_option("--out", coh_args.out, "output directory")->required();
    coh->add_option("--sigma", coh_args.sigma, "structure tensor smoothing sigma")
        ->check(CLI::PositiveNumber);
    coh->add_option("--hue-lo", coh_args.hue_lo, "mask hue window low (degrees)");
    coh->add_option("--hue-hi", coh_args.hue_hi, "mask hue window high (degrees)");
    coh->add_option("--sat-min", coh_args.sat_min, "mask saturation minimum");
    coh->add_option("--val-min", coh_args.val_min, "mask value minimum");
    coh->callback([&] { run_coherency(coh_args); });

    StatsArgs stats_args;
    auto* stats = app.add_subcommand("stats", "group statistics and pairwise Welch tests");
    stats->add_option("--coherency", stats_args.coherency_csv, "coherency.csv from the coherency step")
        ->required()
        ->check(CLI::ExistingFile);
    stats->add_option("--out", stats_args.out, "output directory")->required();
    stats->callback([&] { run_stats(stats_args); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? ws::kExitOk : ws::kExitUsage;
    } catch (const ws::UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return ws::kExitUsage;
    } catch (const ws::DataError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return ws::kExitData;
    } catch (const ws::NumericError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return ws::kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return ws::kExitNumeric;
    }
    return ws::kExitOk;
}
