#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

namespace woundstage {

// Dense tensor with an optional gradient buffer. Row major, shape given as a
// list of extents. Gradients live alongside the data so parameter tensors can
// be handed straight to the optimizer.
template <typename T>
struct Tensor {
    std::vector<int> shape;
    std::vector<T> data;
    std::vector<T> grad;  // empty unless requires_grad
    bool requires_grad = false;

    Tensor() = default;
    explicit Tensor(std::vector<int> shp, bool req_grad = false);
    static Tensor from_vector(std::vector<int> shp, std::vector<T> values, bool req_grad = false);
    static Tensor scalar(T value);

    std::int64_t size() const {
        std::int64_t n = 1;
        for (int d : shape) n *= d;
        return shape.empty() ? 0 : n;
    }
    int dim(std::size_t i) const { return shape.at(i); }
    T item() const;  // value of a single-element tensor
    void set_requires_grad(bool value);
    void zero_grad();
    bool all_finite() const;
};

template <typename T>
using TensorPtr = std::shared_ptr<Tensor<T>>;

template <typename T>
TensorPtr<T> make_tensor(std::vector<int> shape, bool requires_grad = false) {
    return std::make_shared<Tensor<T>>(std::move(shape), requires_grad);
}

enum class OpKind {
    conv2d,
    relu,
    maxpool2d,
    linear,
    flatten,
    softmax_cross_entropy,
    select,
    add,
    scale,
    sum,
};

// How ReLU routes gradients during backward. Guided mode additionally
// requires the incoming gradient to be positive, which is what turns a plain
// input gradient into a guided one. All other ops ignore the mode.
enum class GradMode { standard, guided };

// Records every op applied through it and replays their vector-Jacobian
// products in reverse on backward(). Single threaded by design; results are
// bit-reproducible run to run.
template <typename T>
class Tape {
  public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // input [C,H,W], weight [F,C,kh,kw] with odd kernel extents, bias [F].
    // Cross-correlation with zero padding. Output [F,Hout,Wout] where
    // Hout = (H + 2*padding - kh) / stride + 1, which must divide exactly.
    TensorPtr<T> conv2d(const TensorPtr<T>& input, const TensorPtr<T>& weight,
                        const TensorPtr<T>& bias, int stride = 1, int padding = 0);

    TensorPtr<T> relu(const TensorPtr<T>& x);

    // input [C,H,W]; window k, step `stride`; (H-k) and (W-k) must divide by
    // stride. Ties inside a window resolve to the first element in row-major
    // scan order, so backward routing is deterministic.
    TensorPtr<T> maxpool2d(const TensorPtr<T>& x, int k, int stride);

    // x [N], weight [M,N], bias [M] -> [M].
    TensorPtr<T> linear(const TensorPtr<T>& x, const TensorPtr<T>& weight,
                        const TensorPtr<T>& bias);

    TensorPtr<T> flatten(const TensorPtr<T>& x);

    // logits [K], label in [0,K). Stable log-sum-exp with max subtraction.
    TensorPtr<T> softmax_cross_entropy(const TensorPtr<T>& logits, int label);

    TensorPtr<T> select(const TensorPtr<T>& x, int index);  // scalar x[index]
    TensorPtr<T> add(const TensorPtr<T>& a, const TensorPtr<T>& b);
    TensorPtr<T> scale(const TensorPtr<T>& x, T factor);
    TensorPtr<T> sum(const TensorPtr<T>& x);

    // Seeds `root` (a single-element tensor) with gradient 1 and runs all
    // recorded ops in reverse. Gradients of tensors created by this tape are
    // recomputed from scratch; gradients of leaf tensors (parameters, inputs)
    // accumulate across calls until someone zeroes them.
    void backward(const TensorPtr<T>& root, GradMode mode = GradMode::standard);

    void clear();
    std::size_t node_count() const { return nodes_.size(); }

    // With recording off, ops only compute forward values: no closures are
    // kept and outputs never require gradients. Cheap inference mode.
    void set_recording(bool value) { recording_ = value; }
    bool recording() const { return recording_; }

  private:
    struct Node {
        OpKind kind;
        std::function<void(GradMode)> vjp;
    };
    std::vector<Node> nodes_;
    std::vector<TensorPtr<T>> produced_;  // op outputs, zeroed at each backward
    bool recording_ = true;

    TensorPtr<T> make_output(std::vector<int> shape, bool requires_grad);
    void record(OpKind kind, std::function<void(GradMode)> vjp);
};

// Numerically stable softmax of a flat score vector.
template <typename T>
std::vector<T> softmax(const std::vector<T>& logits);

enum class OptimKind { adam, sgd };

struct OptimizerConfig {
    OptimKind kind = OptimKind::adam;
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Adam with bias correction, or plain SGD. Owns per-parameter moment buffers;
// parameters keep their gradient in Tensor::grad.
template <typename T>
class Optimizer {
  public:
    Optimizer(std::vector<TensorPtr<T>> params, OptimizerConfig cfg);
    void step();
    void zero_grad();
    std::int64_t step_count() const { return steps_; }
    const OptimizerConfig& config() const { return cfg_; }

  private:
    std::vector<TensorPtr<T>> params_;
    std::vector<std::vector<T>> m_, v_;
    OptimizerConfig cfg_;
    std::int64_t steps_ = 0;
};

extern template struct Tensor<float>;
extern template struct Tensor<double>;
extern template class Tape<float>;
extern template class Tape<double>;
extern template class Optimizer<float>;
extern template class Optimizer<double>;
extern template std::vector<float> softmax<float>(const std::vector<float>&);
extern template std::vector<double> softmax<double>(const std::vector<double>&);

}  // namespace woundstage
