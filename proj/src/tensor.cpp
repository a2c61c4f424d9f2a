#include "woundstage/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "woundstage/errors.hpp"

namespace woundstage {

namespace {

std::string shape_str(const std::vector<int>& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

// out[M,N] += a[M,K] * b[K,N]; rows of b are contiguous so the inner loop
// vectorizes. This one kernel carries all the convolution and linear math.
template <typename T>
void gemm_accumulate(const T* a, const T* b, T* out, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const T* arow = a + static_cast<std::size_t>(i) * k;
        T* orow = out + static_cast<std::size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            T av = arow[p];
            if (av == T(0)) continue;
            const T* brow = b + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
}

// out[M,K] += a[M,N] * b[K,N]^T, i.e. out[i,p] += dot(a_row_i, b_row_p).
template <typename T>
void gemm_abt_accumulate(const T* a, const T* b, T* out, int m, int n, int k) {
    for (int i = 0; i < m; ++i) {
        const T* arow = a + static_cast<std::size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const T* brow = b + static_cast<std::size_t>(p) * n;
            T acc = 0;
            for (int j = 0; j < n; ++j) acc += arow[j] * brow[j];
            out[static_cast<std::size_t>(i) * k + p] += acc;
        }
    }
}

// Unfold conv patches into a [C*kh*kw, Hout*Wout] matrix (zero padded).
template <typename T>
void im2col(const T* in, int c, int h, int w, int kh, int kw, int stride, int pad, int hout,
            int wout, T* col) {
    for (int ch = 0; ch < c; ++ch) {
        for (int i = 0; i < kh; ++i) {
            for (int j = 0; j < kw; ++j) {
                T* crow = col + (static_cast<std::size_t>(ch) * kh * kw + static_cast<std::size_t>(i) * kw + j) *
                                    (static_cast<std::size_t>(hout) * wout);
                for (int oy = 0; oy < hout; ++oy) {
                    int iy = oy * stride - pad + i;
                    T* dst = crow + static_cast<std::size_t>(oy) * wout;
                    if (iy < 0 || iy >= h) {
                        std::fill(dst, dst + wout, T(0));
                        continue;
                    }
                    const T* src = in + (static_cast<std::size_t>(ch) * h + iy) * w;
                    for (int ox = 0; ox < wout; ++ox) {
                        int ix = ox * stride - pad + j;
                        dst[ox] = (ix >= 0 && ix < w) ? src[ix] : T(0);
                    }
                }
            }
        }
    }
}

// Scatter-add the col-space gradient back onto the input gradient.
template <typename T>
void col2im_accumulate(const T* col, int c, int h, int w, int kh, int kw, int stride, int pad,
                       int hout, int wout, T* gin) {
    for (int ch = 0; ch < c; ++ch) {
        for (int i = 0; i < kh; ++i) {
            for (int j = 0; j < kw; ++j) {
                const T* crow = col + (static_cast<std::size_t>(ch) * kh * kw + static_cast<std::size_t>(i) * kw + j) *
                                          (static_cast<std::size_t>(hout) * wout);
                for (int oy = 0; oy < hout; ++oy) {
                    int iy = oy * stride - pad + i;
                    if (iy < 0 || iy >= h) continue;
                    const T* src = crow + static_cast<std::size_t>(oy) * wout;
                    T* dst = gin + (static_cast<std::size_t>(ch) * h + iy) * w;
                    for (int ox = 0; ox < wout; ++ox) {
                        int ix = ox * stride - pad + j;
                        if (ix >= 0 && ix < w) dst[ix] += src[ox];
                    }
                }
            }
        }
    }
}

}  // namespace

template <typename T>
Tensor<T>::Tensor(std::vector<int> shp, bool req_grad) : shape(std::move(shp)) {
    for (int d : shape)
        if (d <= 0) throw DimensionError("tensor extents must be positive, got " + shape_str(shape));
    data.assign(static_cast<std::size_t>(size()), T(0));
    set_requires_grad(req_grad);
}

template <typename T>
Tensor<T> Tensor<T>::from_vector(std::vector<int> shp, std::vector<T> values, bool req_grad) {
    Tensor<T> t(std::move(shp), req_grad);
    if (values.size() != t.data.size())
        throw DimensionError("value count " + std::to_string(values.size()) + " does not fill shape " +
                             shape_str(t.shape));
    t.data = std::move(values);
    return t;
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value) {
    Tensor<T> t(std::vector<int>{1});
    t.data[0] = value;
    return t;
}

template <typename T>
T Tensor<T>::item() const {
    if (size() != 1) throw UsageError("item() requires a single-element tensor, shape is " + shape_str(shape));
    return data[0];
}

template <typename T>
void Tensor<T>::set_requires_grad(bool value) {
    requires_grad = value;
    if (value)
        grad.assign(data.size(), T(0));
    else
        grad.clear();
}

template <typename T>
void Tensor<T>::zero_grad() {
    std::fill(grad.begin(), grad.end(), T(0));
}

template <typename T>
bool Tensor<T>::all_finite() const {
    for (T v : data)
        if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
}

template <typename T>
TensorPtr<T> Tape<T>::make_output(std::vector<int> shape, bool requires_grad) {
    auto out = make_tensor<T>(std::move(shape), requires_grad);
    if (recording_) produced_.push_back(out);
    return out;
}

template <typename T>
void Tape<T>::record(OpKind kind, std::function<void(GradMode)> vjp) {
    nodes_.push_back(Node{kind, std::move(vjp)});
}

template <typename T>
void Tape<T>::clear() {
    nodes_.clear();
    produced_.clear();
}

template <typename T>
TensorPtr<T> Tape<T>::conv2d(const TensorPtr<T>& input, const TensorPtr<T>& weight,
                             const TensorPtr<T>& bias, int stride, int padding) {
    if (input->shape.size() != 3)
        throw DimensionError("conv2d: input must be [C,H,W], got " + shape_str(input->shape));
    if (weight->shape.size() != 4)
        throw DimensionError("conv2d: weight must be [F,C,kh,kw], got " + shape_str(weight->shape));
    int c = input->dim(0), h = input->dim(1), w = input->dim(2);
    int f = weight->dim(0), wc = weight->dim(1), kh = weight->dim(2), kw = weight->dim(3);
    if (wc != c)
        throw DimensionError("conv2d: weight expects " + std::to_string(wc) + " input channels, input has " +
                             std::to_string(c));
    if (kh % 2 == 0 || kw % 2 == 0)
        throw DimensionError("conv2d: kernel extents must be odd, got " + std::to_string(kh) + "x" +
                             std::to_string(kw));
    if (bias->shape.size() != 1 || bias->dim(0) != f)
        throw DimensionError("conv2d: bias must be [" + std::to_string(f) + "], got " + shape_str(bias->shape));
    if (stride < 1) throw DimensionError("conv2d: stride must be >= 1");
    if (padding < 0) throw DimensionError("conv2d: padding must be >= 0");
    int span_h = h + 2 * padding - kh;
    int span_w = w + 2 * padding - kw;
    if (span_h < 0 || span_w < 0)
        throw DimensionError("conv2d: kernel larger than padded input");
    if (span_h % stride != 0 || span_w % stride != 0)
        throw DimensionError("conv2d: stride does not tile the padded input");
    int hout = span_h / stride + 1;
    int wout = span_w / stride + 1;

    int K = c * kh * kw;
    int N = hout * wout;
    auto col = std::make_shared<std::vector<T>>(static_cast<std::size_t>(K) * N);
    im2col(input->data.data(), c, h, w, kh, kw, stride, padding, hout, wout, col->data());

    bool needs_grad = recording_ && (input->requires_grad || weight->requires_grad || bias->requires_grad);
    auto out = make_output({f, hout, wout}, needs_grad);
    for (int fi = 0; fi < f; ++fi)
        std::fill_n(out->data.begin() + static_cast<std::size_t>(fi) * N, N, bias->data[fi]);
    gemm_accumulate(weight->data.data(), col->data(), out->data.data(), f, K, N);

    if (needs_grad) {
        record(OpKind::conv2d, [=](GradMode) {
            if (out->grad.empty()) return;
            const T* gout = out->grad.data();
            if (bias->requires_grad) {
                for (int fi = 0; fi < f; ++fi) {
                    T acc = 0;
                    const T* row = gout + static_cast<std::size_t>(fi) * N;
                    for (int j = 0; j < N; ++j) acc += row[j];
                    bias->grad[fi] += acc;
                }
            }
            if (weight->requires_grad)
                gemm_abt_accumulate(gout, col->data(), weight->grad.data(), f, N, K);
            if (input->requires_grad) {
                std::vector<T> gcol(static_cast<std::size_t>(K) * N, T(0));
                // gcol = W^T * gout, accumulated row by row to keep access contiguous
                for (int fi = 0; fi < f; ++fi) {
                    const T* grow = gout + static_cast<std::size_t>(fi) * N;
                    const T* wrow = weight->data.data() + static_cast<std::size_t>(fi) * K;
                    for (int p = 0; p < K; ++p) {
                        T wv = wrow[p];
                        if (wv == T(0)) continue;
                        T* crow = gcol.data() + static_cast<std::size_t>(p) * N;
                        for (int j = 0; j < N; ++j) crow[j] += wv * grow[j];
                    }
                }
                col2im_accumulate(gcol.data(), c, h, w, kh, kw, stride, padding, hout, wout,
                                  input->grad.data());
            }
        });
    }
    return out;
}

template <typename T>
TensorPtr<T> Tape<T>::relu(const TensorPtr<T>& x) {
    bool needs_grad = recording_ && x->requires_grad;
    auto out = make_output(x->shape, needs_grad);
    for (std::size_t i = 0; i < x->data.size(); ++i) out->data[i] = x->data[i] > T(0) ? x->data[i] : T(0);
    if (needs_grad) {
        record(OpKind::relu, [=](GradMode mode) {
            if (out->grad.empty()) return;
            if (mode == GradMode::guided) {
                // pass only where the forward input was positive AND the
                // incoming gradient is positive
                for (std::size_t i = 0; i < x->data.size(); ++i)
                    if (x->data[i] > T(0) && out->grad[i] > T(0)) x->grad[i] += out->grad[i];
            } else {
                for (std::size_t i = 0; i < x->data.size(); ++i)
                    if (x->data[i] > T(0)) x->grad[i] += out->grad[i];
            }
        });
    }
    return out;
}

template <typename T>
TensorPtr<T> Tape<T>::maxpool2d(const TensorPtr<T>& x, int k, int stride) {
    if (x->shape.size() != 3)
        throw DimensionError("maxpool2d: input must be [C,H,W], got " + shape_str(x->shape));
    if (k < 1 || stride < 1) throw DimensionError("maxpool2d: window and stride must be >= 1");
    int c = x->dim(0), h = x->dim(1), w = x->dim(2);
    if (k > h || k > w) throw DimensionError("maxpool2d: window larger than input");
    if ((h - k) % stride != 0 || (w - k) % stride != 0)
        throw DimensionError("maxpool2d: windows do not tile the input (H,W " + std::to_string(h) + "," +
                             std::to_string(w) + " window " + std::to_string(k) + " stride " +
                             std::to_string(stride) + ")");
    int hout = (h - k) / stride + 1;
    int wout = (w - k) / stride + 1;

    bool needs_grad = recording_ && x->requires_grad;
    auto out = make_output({c, hout, wout}, needs_grad);
    auto argmax = std::make_shared<std::vector<std::int32_t>>(out->data.size());
    for (int ch = 0; ch < c; ++ch) {
        const T* plane = x->data.data() + static_cast<std::size_t>(ch) * h * w;
        for (int oy = 0; oy < hout; ++oy) {
            for (int ox = 0; ox < wout; ++ox) {
                int base_y = oy * stride, base_x = ox * stride;
                T best = plane[static_cast<std::size_t>(base_y) * w + base_x];
                int best_idx = base_y * w + base_x;
                for (int i = 0; i < k; ++i)
                    for (int j = 0; j < k; ++j) {
                        int idx = (base_y + i) * w + (base_x + j);
                        if (plane[idx] > best) {  // strict: first max wins
                            best = plane[idx];
                            best_idx = idx;
                        }
                    }
                std::size_t o = (static_cast<std::size_t>(ch) * hout + oy) * wout + ox;
                out->data[o] = best;
                (*argmax)[o] = best_idx;
            }
        }
    }
    if (needs_grad) {
        int plane_sz = h * w;
        record(OpKind::maxpool2d, [=](GradMode) {
            if (out->grad.empty()) return;
            std::size_t per_ch = static_cast<std::size_t>(hout) * wout;
            for (int ch = 0; ch < c; ++ch) {
                T* gplane = x->grad.data() + static_cast<std::size_t>(ch) * plane_sz;
                for (std::size_t o = 0; o < per_ch; ++o) {
                    std::size_t idx = static_cast<std::size_t>(ch) * per_ch + o;
                    gplane[(*argmax)[idx]] += out->grad[idx];
                }
            }
        });
    }
    return out;
}

template <typename T>
TensorPtr<T> Tape<T>::linear(const TensorPtr<T>& x, const TensorPtr<T>& weight,
                             const TensorPtr<T>& bias) {
    if (x->shape.size() != 1)
        throw DimensionError("linear: input must be flat, got " + shape_str(x->shape));
    if (weight->shape.size() != 2)
        throw DimensionError("linear: weight must be [M,N], got " + shape_str(weight->shape));
    int n = x->dim(0), m = weight->dim(0);
    if (weight->dim(1) != n)
        throw DimensionError("linear: weight expects " + std::to_string(weight->dim(1)) +
                             " inputs, got " + std::to_string(n));
    if (bias->shape.size() != 1 || bias->dim(0) != m)
        throw DimensionError("linear: bias must be [" + std::to_string(m) + "], got " + shape_str(bias->shape));

    bool needs_grad = recording_ && (x->requires_grad || weight->requires_grad || bias->requires_grad);
    auto out = make_output({m}, needs_grad);
    for (int i = 0; i < m; ++i) {
        const T* wrow = weight->data.data() + static_cast<std::size_t>(i) * n;
        T acc = bias->data[i];
        for (int j = 0; j < n; ++j) acc += wrow[j] * x->data[j];
        out->data[i] = acc;
    }
    if (needs_grad) {
        record(OpKind::linear, [=](GradMode) {
            if (out->grad.empty()) return;
            for (int i = 0; i < m; ++i) {
                T g = out->grad[i];
                if (g == T(0)) continue;
                if (bias->requires_grad) bias->grad[i] += g;
                const T* wrow = weight->data.data() + static_cast<std::size_t>(i) * n;
                if (weight->requires_grad) {
                    T* gw = weight->grad.data() + static_cast<std::size_t>(i) * n;
                    for (int j = 0; j < n; ++j) gw[j] += g * x->data[j];
                }
                if (x->requires_grad)
                    for (int j = 0; j < n; ++j) x->grad[j] += g * wrow[j];
            }
        });
    }
    return out;
}

template <typename T>
TensorPtr<T> Tape<T>::flatten(const TensorPtr<T>& x) {
    bool needs_grad = recording_ && x->requires_grad;
    auto out = make_output({static_cast<int>(x->size())}, needs_grad);
    out->data = x->data;
    if (needs_grad) {
        record(OpKind::flatten, [=](GradMode) {
            if (out->grad.empty()) return;
            for (std::size_t i = 0; i < x->grad.size(); ++i) x->grad[i] += out->grad[i];
        });
    }
    return out;
}

template <typename T>
TensorPtr<T> Tape<T>::softmax_cross_entropy(const TensorPtr<T>& logits, int label) {
    if (logits->shape.size() != 1)
        throw DimensionError("softmax_cross_entropy: logits must be flat, got " + shape_str(logits->shape));
    int k = logits->dim(0);
    if (label < 0 || label >= k)
        throw UsageError("softmax_cross_entropy: label " + std::to_string(label) + " outside [0," +
                         std::to_string(k) + ")");
    auto probs = std::make_shared<std::vector<T>>(softmax(logits->data));
    T mx = *std::max_element(logits->data.begin(), logits->data.end());
    T sum_exp = 0;
    for (T v : logits->data) sum_exp += std::exp(v - mx);
    T loss = std::log(sum_exp) - (logits->data[label] - mx);

    bool needs_grad = recording_ && logits->requires_grad;
    auto out = make_output({1}, needs_grad);
    out->data[0] = loss;
    if (needs_grad) {
        record(OpKind::softmax_cross_entropy, [=](GradMode) {
            if (out->grad.empty()) return;
            T g = out->grad[0];
            for (int i = 0; i < k; ++i)
                logits->grad[i] += g * ((*probs)[i] - (i == label ? T(1) : T(0)));
        });
    }
    return out;
}

template <typename T>
TensorPtr<T> Tape<T>::select(const TensorPtr<T>& x, int index) {
    if (index < 0 || index >= x->size())
        throw UsageError("select: index " + std::to_string(index) + " outside tensor of size " +
                         std::to_string(x->size()));
    bool needs_grad = recording_ && x->requires_grad;
    auto out = make_output({1}, needs_grad);
    out->data[0] = x->data[static_cast<std::size_t>(index)];
    if (needs_grad) {
        record(OpKind::select, [=](GradMode) {
            if (out->grad.empty()) return;
            x->grad[static_cast<std::size_t>(index)] += out->grad[0];
        });
    }
    return out;
}

template <typename T>
TensorPtr<T> Tape<T>::add(const TensorPtr<T>& a, const TensorPtr<T>& b) {
    if (a->shape != b->shape)
        throw DimensionError("add: shapes differ, " + shape_str(a->shape) + " vs " + shape_str(b->shape));
    bool needs_grad = recording_ && (a->requires_grad || b->requires_grad);
    auto out = make_output(a->shape, needs_grad);
    for (std::size_t i = 0; i < a->data.size(); ++i) out->data[i] = a->data[i] + b->data[i];
    if (needs_grad) {
        record(OpKind::add, [=](GradMode) {
            if (out->grad.empty()) return;
            if (a->requires_grad)
                for (std::size_t i = 0; i < a->grad.size(); ++i) a->grad[i] += out->grad[i];
            if (b->requires_grad)
                for (std::size_t i = 0; i < b->grad.size(); ++i) b->grad[i] += out->grad[i];
        });
    }
    return out;
}

template <typename T>
TensorPtr<T> Tape<T>::scale(const TensorPtr<T>& x, T factor) {
    bool needs_grad = recording_ && x->requires_grad;
    auto out = make_output(x->shape, needs_grad);
    for (std::size_t i = 0; i < x->data.size(); ++i) out->data[i] = factor * x->data[i];
    if (needs_grad) {
        record(OpKind::scale, [=](GradMode) {
            if (out->grad.empty()) return;
            for (std::size_t i = 0; i < x->grad.size(); ++i) x->grad[i] += factor * out->grad[i];
        });
    }
    return out;
}

template <typename T>
TensorPtr<T> Tape<T>::sum(const TensorPtr<T>& x) {
    bool needs_grad = recording_ && x->requires_grad;
    auto out = make_output({1}, needs_grad);
    T acc = 0;
    for (T v : x->data) acc += v;
    out->data[0] = acc;
    if (needs_grad) {
        record(OpKind::sum, [=](GradMode) {
            if (out->grad.empty()) return;
            for (std::size_t i = 0; i < x->grad.size(); ++i) x->grad[i] += out->grad[0];
        });
    }
    return out;
}

template <typename T>
void Tape<T>::backward(const TensorPtr<T>& root, GradMode mode) {
    if (root->size() != 1) throw UsageError("backward: root must be a single-element tensor");
    if (!root->requires_grad)
        throw UsageError("backward: root does not require gradients; nothing to differentiate");
    for (auto& t : produced_) t->zero_grad();
    root->grad[0] = T(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->vjp(mode);
}

template <typename T>
std::vector<T> softmax(const std::vector<T>& logits) {
    if (logits.empty()) throw UsageError("softmax: empty input");
    T mx = *std::max_element(logits.begin(), logits.end());
    std::vector<T> out(logits.size());
    T sum = 0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - mx);
        sum += out[i];
    }
    for (T& v : out) v /= sum;
    return out;
}

template <typename T>
Optimizer<T>::Optimizer(std::vector<TensorPtr<T>> params, OptimizerConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
    for (auto& p : params_)
        if (!p->requires_grad) throw UsageError("optimizer: all parameters must require gradients");
    if (cfg_.kind == OptimKind::adam) {
        m_.resize(params_.size());
        v_.resize(params_.size());
        for (std::size_t i = 0; i < params_.size(); ++i) {
            m_[i].assign(params_[i]->data.size(), T(0));
            v_[i].assign(params_[i]->data.size(), T(0));
        }
    }
}

template <typename T>
void Optimizer<T>::step() {
    ++steps_;
    if (cfg_.kind == OptimKind::sgd) {
        T lr = static_cast<T>(cfg_.learning_rate);
        for (auto& p : params_)
            for (std::size_t i = 0; i < p->data.size(); ++i) p->data[i] -= lr * p->grad[i];
        return;
    }
    double b1 = cfg_.beta1, b2 = cfg_.beta2;
    double bc1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
    double bc2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
        auto& p = *params_[pi];
        auto& m = m_[pi];
        auto& v = v_[pi];
        for (std::size_t i = 0; i < p.data.size(); ++i) {
            double g = static_cast<double>(p.grad[i]);
            double mi = b1 * m[i] + (1.0 - b1) * g;
            double vi = b2 * v[i] + (1.0 - b2) * g * g;
            m[i] = static_cast<T>(mi);
            v[i] = static_cast<T>(vi);
            double mhat = mi / bc1;
            double vhat = vi / bc2;
            p.data[i] -= static_cast<T>(cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.epsilon));
        }
    }
}

template <typename T>
void Optimizer<T>::zero_grad() {
    for (auto& p : params_) p->zero_grad();
}

template struct Tensor<float>;
template struct Tensor<double>;
template class Tape<float>;
template class Tape<double>;
template class Optimizer<float>;
template class Optimizer<double>;
template std::vector<float> softmax<float>(const std::vector<float>&);
template std::vector<double> softmax<double>(const std::vector<double>&);

}  // namespace woundstage
