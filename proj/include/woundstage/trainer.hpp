#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "woundstage/datapipe.hpp"
#include "woundstage/model.hpp"
#include "woundstage/tensor.hpp"

namespace woundstage {

struct HyperParams {
    double learning_rate = 1e-4;
    int epochs = 40;
    int batch_size = 16;
    std::uint64_t seed = 0;
    OptimKind optimizer = OptimKind::adam;
};

struct EpochRecord {
    int epoch = 0;  // 1-based
    double train_loss = 0, train_acc = 0;
    double val_loss = 0, val_acc = 0, val_auc = 0;
};

struct History {
    std::vector<EpochRecord> records;
};

void save_history_csv(const History& history, const std::filesystem::path& path);

struct EvalReport {
    int num_classes = 0;
    int total = 0;
    int correct = 0;
    std::vector<std::vector<int>> confusion;            // [true][predicted]
    std::vector<std::optional<double>> per_class_acc;   // empty slot when class absent
    double mean_class_acc = 0;                          // over present classes only
    double overall_acc = 0;
    double macro_auc = 0;  // NaN when no class has both positives and negatives
};

// Area under the ROC curve by pair counting with tie credit 1/2. Exact
// complement: flipping all labels yields exactly 1 - auc in floating point.
// labels must be 0/1 with both values present.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

// Builds the full report from per-sample class scores (rows sum to anything;
// only order matters for accuracy, values matter for AUC). Prediction is the
// first maximal score.
EvalReport eval_from_scores(const std::vector<std::vector<double>>& scores,
                            const std::vector<int>& labels, int num_classes);

EvalReport evaluate(const ModelGraph<float>& model, const Dataset& data);

std::string eval_report_json(const EvalReport& report);
void save_eval_report(const EvalReport& report, const std::filesystem::path& path);

// Minibatch cross-entropy training. Per-epoch order is a seeded shuffle, the
// final partial batch is kept, and each sample's loss is scaled by the actual
// batch size on the tape. After the last epoch the parameters that achieved
// the best validation accuracy are restored (ties keep the earlier epoch).
// Every record carries train and validation metrics for that epoch.
History train_model(ModelGraph<float>& model, const Dataset& train, const Dataset& val,
                    const HyperParams& hp);

}  // namespace woundstage
