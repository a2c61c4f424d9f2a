#include "woundstage/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "woundstage/errors.hpp"
#include "woundstage/rng.hpp"

namespace woundstage {

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw UsageError("roc_auc: scores and labels differ in length");
    if (scores.empty()) throw DataError("roc_auc: empty input");
    std::uint64_t n_pos = 0, n_neg = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1)
            throw UsageError("roc_auc: labels must be 0 or 1, got " + std::to_string(labels[i]));
        if (!std::isfinite(scores[i])) throw NumericError("roc_auc: non-finite score");
        labels[i] ? ++n_pos : ++n_neg;
    }
    if (n_pos == 0 || n_neg == 0)
        throw DataError("roc_auc: undefined with a single class present");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Count positive-negative pairs: a win when the positive scores strictly
    // higher, half credit for ties. Everything stays integral so the
    // complement identity can be exact.
    std::uint64_t wins2 = 0;  // doubled
    std::uint64_t neg_below = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        std::uint64_t group_pos = 0, group_neg = 0;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            labels[order[j]] ? ++group_pos : ++group_neg;
            ++j;
        }
        wins2 += 2 * group_pos * neg_below + group_pos * group_neg;
        neg_below += group_neg;
        i = j;
    }
    std::uint64_t den2 = 2 * n_pos * n_neg;
    // Pick the half of the ratio that divides out exactly symmetric to its
    // complement: auc(labels) + auc(1-labels) == 1.0 bit for bit.
    if (2 * wins2 >= den2) return static_cast<double>(wins2) / static_cast<double>(den2);
    return 1.0 - static_cast<double>(den2 - wins2) / static_cast<double>(den2);
}

EvalReport eval_from_scores(const std::vector<std::vector<double>>& scores,
                            const std::vector<int>& labels, int num_classes) {
    if (num_classes < 2) throw UsageError("eval: need at least two classes");
    if (scores.size() != labels.size()) throw UsageError("eval: scores and labels differ in length");
    if (scores.empty()) throw DataError("eval: empty input");

    EvalReport r;
    r.num_classes = num_classes;
    r.total = static_cast<int>(scores.size());
    r.confusion.assign(static_cast<std::size_t>(num_classes),
                       std::vector<int>(static_cast<std::size_t>(num_classes), 0));
    r.per_class_acc.assign(static_cast<std::size_t>(num_classes), std::nullopt);

    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (static_cast<int>(scores[i].size()) != num_classes)
            throw UsageError("eval: score row " + std::to_string(i) + " has " +
                             std::to_string(scores[i].size()) + " entries, expected " +
                             std::to_string(num_classes));
        if (labels[i] < 0 || labels[i] >= num_classes)
            throw DataError("eval: label " + std::to_string(labels[i]) + " outside [0," +
                            std::to_string(num_classes) + ")");
        int pred = static_cast<int>(
            std::max_element(scores[i].begin(), scores[i].end()) - scores[i].begin());
        ++r.confusion[static_cast<std::size_t>(labels[i])][static_cast<std::size_t>(pred)];
        if (pred == labels[i]) ++r.correct;
    }
    r.overall_acc = static_cast<double>(r.correct) / r.total;

    double acc_sum = 0;
    int present = 0;
    for (int c = 0; c < num_classes; ++c) {
        long long row = 0;
        for (int k = 0; k < num_classes; ++k) row += r.confusion[static_cast<std::size_t>(c)][static_cast<std::size_t>(k)];
        if (row == 0) continue;
        double acc = static_cast<double>(r.confusion[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)]) /
                     static_cast<double>(row);
        r.per_class_acc[static_cast<std::size_t>(c)] = acc;
        acc_sum += acc;
        ++present;
    }
    r.mean_class_acc = acc_sum / present;

    // macro one-vs-rest AUC; classes lacking positives or negatives are
    // skipped rather than polluting the average
    double auc_sum = 0;
    int auc_n = 0;
    for (int c = 0; c < num_classes; ++c) {
        std::vector<double> s(scores.size());
        std::vector<int> bin(scores.size());
        int pos = 0;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            s[i] = scores[i][static_cast<std::size_t>(c)];
            bin[i] = labels[i] == c ? 1 : 0;
            pos += bin[i];
        }
        if (pos == 0 || pos == static_cast<int>(scores.size())) continue;
        auc_sum += roc_auc(s, bin);
        ++auc_n;
    }
    r.macro_auc = auc_n > 0 ? auc_sum / auc_n : std::numeric_limits<double>::quiet_NaN();
    return r;
}

namespace {

double sample_loss_from_logits(const std::vector<float>& logits, int label) {
    double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0;
    for (float v : logits) sum += std::exp(static_cast<double>(v) - mx);
    return std::log(sum) - (static_cast<double>(logits[static_cast<std::size_t>(label)]) - mx);
}

struct PassMetrics {
    double loss = 0, acc = 0, auc = 0;
};

PassMetrics scored_pass(const ModelGraph<float>& model, const Dataset& ds,
                        std::vector<std::vector<double>>* scores_out) {
    PassMetrics m;
    std::vector<std::vector<double>> scores;
    scores.reserve(ds.size());
    int correct = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        std::vector<float> logits = model.infer_logits(ds.inputs[i]);
        m.loss += sample_loss_from_logits(logits, ds.labels[i]);
        int pred = static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
        if (pred == ds.labels[i]) ++correct;
        std::vector<float> probs = softmax(logits);
        scores.emplace_back(probs.begin(), probs.end());
    }
    m.loss /= static_cast<double>(ds.size());
    m.acc = static_cast<double>(correct) / static_cast<double>(ds.size());
    EvalReport rep = eval_from_scores(scores, ds.labels, model.config.num_classes);
    m.auc = rep.macro_auc;
    if (scores_out) *scores_out = std::move(scores);
    return m;
}

void check_dataset(const ModelGraph<float>& model, const Dataset& ds, const char* which) {
    int s = resolved_input_size(model.config);
    if (ds.height != s || ds.width != s)
        throw DataError(std::string(which) + " set is " + std::to_string(ds.width) + "x" +
                        std::to_string(ds.height) + ", model expects " + std::to_string(s) + "x" +
                        std::to_string(s));
    if (ds.inputs.size() != ds.labels.size())
        throw DataError(std::string(which) + " set has " + std::to_string(ds.inputs.size()) +
                        " inputs but " + std::to_string(ds.labels.size()) + " labels");
    std::size_t expect = static_cast<std::size_t>(3) * s * s;
    for (std::size_t i = 0; i < ds.inputs.size(); ++i)
        if (ds.inputs[i].size() != expect)
            throw DataError(std::string(which) + " sample " + std::to_string(i) + " has " +
                            std::to_string(ds.inputs[i].size()) + " values, expected " +
                            std::to_string(expect));
    for (int l : ds.labels)
        if (l < 0 || l >= model.config.num_classes)
            throw DataError(std::string(which) + " set has label " + std::to_string(l) +
                            ", model has " + std::to_string(model.config.num_classes) + " classes");
}

}  // namespace

History train_model(ModelGraph<float>& model, const Dataset& train, const Dataset& val,
                    const HyperParams& hp) {
    if (hp.batch_size < 1) throw UsageError("batch_size must be >= 1");
    if (hp.epochs < 0) throw UsageError("epochs must be >= 0");
    if (hp.learning_rate <= 0) throw UsageError("learning_rate must be positive");
    History history;
    if (hp.epochs == 0) return history;
    if (train.size() == 0) throw DataError("training set is empty");
    if (val.size() == 0) throw DataError("validation set is empty");
    if (train.size() == 0) throw DataError("training set is empty");
    if (val.size() == 0) throw DataError("validation set is empty");
    check_dataset(model, train, "training");
    check_dataset(model, val, "validation");

    auto trainable = model.trainable_parameters();
    if (trainable.empty()) throw UsageError("model has no trainable parameters");
    OptimizerConfig ocfg;
    ocfg.kind = hp.optimizer;
    ocfg.learning_rate = hp.learning_rate;
    Optimizer<float> opt(trainable, ocfg);

    auto all_params = model.parameters();
    std::vector<std::vector<float>> best_params;
    double best_val_acc = -1.0;

    Rng base(hp.seed);
    int input = train.height;
    std::size_t n = train.size();

    for (int epoch = 1; epoch <= hp.epochs; ++epoch) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        Rng erng = base.fork(static_cast<std::uint64_t>(epoch));
        erng.shuffle(order);

        double loss_sum = 0;
        int correct = 0;
        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(hp.batch_size)) {
            std::size_t stop = std::min(n, start + static_cast<std::size_t>(hp.batch_size));
            float inv_batch = 1.0f / static_cast<float>(stop - start);
            for (std::size_t bi = start; bi < stop; ++bi) {
                std::size_t idx = order[bi];
                Tape<float> tape;
                auto x = make_tensor<float>({3, input, input});
                x->data = train.inputs[idx];
                auto logits = model.forward(tape, x);
                auto loss = tape.softmax_cross_entropy(logits, train.labels[idx]);
                double lv = static_cast<double>(loss->item());
                if (!std::isfinite(lv))
                    throw NumericError("non-finite training loss at epoch " + std::to_string(epoch));
                loss_sum += lv;
                int pred = static_cast<int>(
                    std::max_element(logits->data.begin(), logits->data.end()) - logits->data.begin());
                if (pred == train.labels[idx]) ++correct;
                auto scaled = tape.scale(loss, inv_batch);
                tape.backward(scaled);
            }
            opt.step();
            opt.zero_grad();
        }

        PassMetrics vm = scored_pass(model, val, nullptr);
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(n);
        rec.train_acc = static_cast<double>(correct) / static_cast<double>(n);
        rec.val_loss = vm.loss;
        rec.val_acc = vm.acc;
        rec.val_auc = vm.auc;
        history.records.push_back(rec);

        if (vm.acc > best_val_acc) {
            best_val_acc = vm.acc;
            best_params.clear();
            best_params.reserve(all_params.size());
            for (const auto& p : all_params) best_params.push_back(p->data);
        }
    }

    if (!best_params.empty())
        for (std::size_t i = 0; i < all_params.size(); ++i) all_params[i]->data = best_params[i];
    model.meta.trained_epochs += hp.epochs;
    return history;
}

EvalReport evaluate(const ModelGraph<float>& model, const Dataset& data) {
    if (data.size() == 0) throw DataError("evaluation set is empty");
    check_dataset(model, data, "evaluation");
    std::vector<std::vector<double>> scores;
    scored_pass(model, data, &scores);
    return eval_from_scores(scores, data.labels, model.config.num_classes);
}

void save_history_csv(const History& history, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write history: " + path.string());
    out << "epoch,train_loss,train_acc,val_loss,val_acc,val_auc\n";
    out << std::setprecision(17);
    for (const auto& r : history.records)
        out << r.epoch << ',' << r.train_loss << ',' << r.train_acc << ',' << r.val_loss << ','
            << r.val_acc << ',' << r.val_auc << '\n';
    if (!out) throw DataError("history write failed: " + path.string());
}

std::string eval_report_json(const EvalReport& report) {
    nlohmann::json j;
    j["num_classes"] = report.num_classes;
    j["total"] = report.total;
    j["correct"] = report.correct;
    j["confusion"] = report.confusion;
    nlohmann::json acc = nlohmann::json::array();
    for (const auto& a : report.per_class_acc) {
        if (a)
            acc.push_back(*a);
        else
            acc.push_back(nullptr);
    }
    j["per_class_accuracy"] = acc;
    j["mean_class_accuracy"] = report.mean_class_acc;
    j["overall_accuracy"] = report.overall_acc;
    if (std::isfinite(report.macro_auc))
        j["macro_auc"] = report.macro_auc;
    else
        j["macro_auc"] = nullptr;
    nlohmann::json names = nlohmann::json::array();
    for (int c = 0; c < report.num_classes; ++c)
        names.push_back(report.num_classes == kNumStages ? stage_name(static_cast<StageLabel>(c))
                                                         : "class_" + std::to_string(c));
    j["class_names"] = names;
    return j.dump(2);
}

void save_eval_report(const EvalReport& report, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write report: " + path.string());
    out << eval_report_json(report) << '\n';
    if (!out) throw DataError("report write failed: " + path.string());
}

}  // namespace woundstage
