#include "hpdnet/cnn.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "hpdnet/errors.hpp"
#include "hpdnet/kernel_learning.hpp"
#include "hpdnet/parallel.hpp"
#include "hpdnet/rng.hpp"

namespace hpdnet {
namespace {

constexpr double kProbFloor = 1e-12;

// Seed substreams: weight init and batch drawing must not share a stream
// with the pixel sampler (which uses the seed directly, so kernel learning
// and the head see the same training pixels for the same seed).
constexpr std::uint64_t kInitStream = 11;
constexpr std::uint64_t kBatchStream = 12;

// Per-batch gradients accumulate per chunk of this many samples, and chunks
// reduce in index order; the grouping is independent of the worker budget,
// which keeps training bitwise reproducible under any parallelism.
constexpr std::size_t kGradChunk = 8;

double q32(double x) { return static_cast<double>(static_cast<float>(x)); }

void quantize(std::vector<double>& v) {
    for (double& x : v) x = q32(x);
}

bool has_pool(const CnnConfig& cfg, int layer_1based) {
    return std::find(cfg.pool_after.begin(), cfg.pool_after.end(), layer_1based) !=
           cfg.pool_after.end();
}

int pooled_side(int n) { return n > 1 ? n / 2 : 1; }

int final_side(const CnnConfig& cfg) {
    int side = cfg.patch_size;
    for (std::size_t l = 1; l <= cfg.kernel_sizes.size(); ++l)
        if (has_pool(cfg, static_cast<int>(l))) side = pooled_side(side);
    return side;
}

void check_config(const CnnConfig& cfg) {
    if (cfg.patch_size < 1 || cfg.patch_size % 2 == 0)
        throw ConfigError("patch size must be an odd positive integer");
    if (cfg.kernel_sizes.empty() || cfg.kernel_sizes.size() != cfg.channels.size())
        throw ConfigError("kernel and channel lists must be nonempty and equally long");
    for (int k : cfg.kernel_sizes)
        if (k < 1 || k % 2 == 0) throw ConfigError("conv kernels must be odd positive integers");
    for (int c : cfg.channels)
        if (c < 1) throw ConfigError("channel widths must be positive");
    int prev = 0;
    for (int p : cfg.pool_after) {
        if (p <= prev || p > static_cast<int>(cfg.kernel_sizes.size()))
            throw ConfigError("pool positions must be increasing conv layer indices");
        prev = p;
    }
    if (cfg.fc_width < 1) throw ConfigError("fully connected width must be positive");
    if (cfg.learning_rate < 0.0) throw ConfigError("learning rate must be nonnegative");
    if (cfg.iterations < 0) throw ConfigError("iteration count must be nonnegative");
    if (cfg.batch_size < 1) throw ConfigError("batch size must be positive");
    if (!(cfg.sample_fraction > 0.0) || cfg.sample_fraction > 1.0)
        throw ConfigError("sample fraction must be in (0, 1]");
}

// Mirrors an index into [0, n) about the borders, edge included (-1 -> 0).
int mirror_index(int k, int n) {
    while (k < 0 || k >= n) {
        if (k < 0)
            k = -k - 1;
        else
            k = 2 * n - 1 - k;
    }
    return k;
}

// ---------------------------------------------------------------------------
// Forward pass
// ---------------------------------------------------------------------------

Tensor3 conv_relu_forward(const ConvLayer& layer, const Tensor3& in) {
    const int p = layer.kernel / 2;
    const int out_ch = layer.out_ch;
    Tensor3 out(in.rows, in.cols, out_ch);
    // Stack-free scratch the compiler can prove distinct from the weights,
    // so the accumulation loops vectorize without aliasing checks.
    std::vector<double> scratch(static_cast<std::size_t>(out_ch));
    double* __restrict acc = scratch.data();
    for (int r = 0; r < in.rows; ++r)
        for (int c = 0; c < in.cols; ++c) {
            for (int oc = 0; oc < out_ch; ++oc) acc[oc] = layer.b[oc];
            for (int ky = 0; ky < layer.kernel; ++ky) {
                const int rr = r + ky - p;
                if (rr < 0 || rr >= in.rows) continue;
                const int kx0 = std::max(0, p - c);
                const int kx1 = std::min(layer.kernel, in.cols + p - c);
                const double* xrow = in.v.data() + in.index(rr, c + kx0 - p, 0);
                const double* wrow = &layer.w[layer.windex(ky, kx0, 0, 0)];
                const int span = (kx1 - kx0) * layer.in_ch;
                for (int t = 0; t < span; ++t) {
                    const double xv = xrow[t];
                    const double* __restrict wr = wrow + static_cast<std::size_t>(t) * out_ch;
                    for (int oc = 0; oc < out_ch; ++oc) acc[oc] += xv * wr[oc];
                }
            }
            double* o = &out.at(r, c, 0);
            // Written so a non-finite activation passes through instead of
            // being flushed to zero; divergence must stay observable.
            for (int oc = 0; oc < out_ch; ++oc) o[oc] = acc[oc] < 0.0 ? 0.0 : acc[oc];
        }
    return out;
}

// 2x2/stride-2 max pool, floor halving but never below one cell; records the
// flat source index of every selected maximum (first position wins ties).
Tensor3 pool_forward(const Tensor3& in, std::vector<std::size_t>& src) {
    Tensor3 out(pooled_side(in.rows), pooled_side(in.cols), in.depth);
    src.assign(out.v.size(), 0);
    for (int r = 0; r < out.rows; ++r)
        for (int c = 0; c < out.cols; ++c) {
            const int r1 = std::min(2 * r + 1, in.rows - 1);
            const int c1 = std::min(2 * c + 1, in.cols - 1);
            for (int d = 0; d < in.depth; ++d) {
                double best = -std::numeric_limits<double>::infinity();
                std::size_t best_at = 0;
                for (int rr = 2 * r; rr <= r1; ++rr)
                    for (int cc = 2 * c; cc <= c1; ++cc) {
                        const double val = in.at(rr, cc, d);
                        if (val > best) {
                            best = val;
                            best_at = in.index(rr, cc, d);
                        }
                    }
                out.at(r, c, d) = best;
                src[out.index(r, c, d)] = best_at;
            }
        }
    return out;
}

struct ForwardCache {
    std::vector<Tensor3> conv_out;  // post-relu output per conv layer
    std::vector<Tensor3> pool_out;
    std::vector<std::vector<std::size_t>> pool_src;
    std::vector<int> pool_of_layer;  // index into pool_out, -1 when absent
    std::vector<double> h;           // post-relu fully connected output
    std::vector<double> probs;
};

const Tensor3& layer_input(const ForwardCache& f, std::size_t l, const Tensor3& patch) {
    if (l == 0) return patch;
    const int pl = f.pool_of_layer[l - 1];
    return pl >= 0 ? f.pool_out[static_cast<std::size_t>(pl)] : f.conv_out[l - 1];
}

ForwardCache run_forward(const CnnModel& m, const Tensor3& patch) {
    if (patch.rows != m.cfg.patch_size || patch.cols != m.cfg.patch_size ||
        patch.depth != m.input_dim)
        throw ShapeError("patch " + std::to_string(patch.rows) + "x" +
                         std::to_string(patch.cols) + "x" + std::to_string(patch.depth) +
                         " does not match the model input " +
                         std::to_string(m.cfg.patch_size) + "x" +
                         std::to_string(m.cfg.patch_size) + "x" +
                         std::to_string(m.input_dim));

    const std::size_t layers = m.conv.size();
    ForwardCache f;
    f.conv_out.reserve(layers);
    f.pool_of_layer.assign(layers, -1);
    for (std::size_t l = 0; l < layers; ++l) {
        f.conv_out.push_back(conv_relu_forward(m.conv[l], layer_input(f, l, patch)));
        if (has_pool(m.cfg, static_cast<int>(l) + 1)) {
            std::vector<std::size_t> src;
            Tensor3 po = pool_forward(f.conv_out.back(), src);
            f.pool_of_layer[l] = static_cast<int>(f.pool_out.size());
            f.pool_out.push_back(std::move(po));
            f.pool_src.push_back(std::move(src));
        }
    }

    const Tensor3& flat = layer_input(f, layers, patch);
    const std::size_t fc_in = flat.v.size();
    const std::size_t fc_width = m.fc_b.size();
    if (m.fc_w.size() != fc_in * fc_width)
        throw ShapeError("fully connected weights do not match the conv output size");

    f.h.assign(fc_width, 0.0);
    double* __restrict hp = f.h.data();
    for (std::size_t k = 0; k < fc_width; ++k) hp[k] = m.fc_b[k];
    for (std::size_t i = 0; i < fc_in; ++i) {
        const double xi = flat.v[i];
        const double* __restrict wr = m.fc_w.data() + i * fc_width;
        for (std::size_t k = 0; k < fc_width; ++k) hp[k] += xi * wr[k];
    }
    for (double& hk : f.h)
        if (hk < 0.0) hk = 0.0;

    const std::size_t classes = m.class_ids.size();
    std::vector<double> logits(classes, 0.0);
    for (std::size_t k = 0; k < fc_width; ++k) {
        const double hk = f.h[k];
        const double* wr = &m.cls_w[k * classes];
        for (std::size_t c = 0; c < classes; ++c) logits[c] += hk * wr[c];
    }
    double top = logits[0];
    for (double z : logits) top = std::max(top, z);
    f.probs.assign(classes, 0.0);
    double norm = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
        f.probs[c] = std::exp(logits[c] - top);
        norm += f.probs[c];
    }
    for (double& p : f.probs) p /= norm;
    return f;
}

// ---------------------------------------------------------------------------
// Backward pass
// ---------------------------------------------------------------------------

CnnGradients zero_grads(const CnnModel& m) {
    CnnGradients g;
    g.conv = m.conv;
    for (ConvLayer& l : g.conv) {
        std::fill(l.w.begin(), l.w.end(), 0.0);
        std::fill(l.b.begin(), l.b.end(), 0.0);
    }
    g.fc_w.assign(m.fc_w.size(), 0.0);
    g.fc_b.assign(m.fc_b.size(), 0.0);
    g.cls_w.assign(m.cls_w.size(), 0.0);
    return g;
}

void add_grads(CnnGradients& acc, const CnnGradients& g) {
    for (std::size_t l = 0; l < acc.conv.size(); ++l) {
        for (std::size_t i = 0; i < acc.conv[l].w.size(); ++i) acc.conv[l].w[i] += g.conv[l].w[i];
        for (std::size_t i = 0; i < acc.conv[l].b.size(); ++i) acc.conv[l].b[i] += g.conv[l].b[i];
    }
    for (std::size_t i = 0; i < acc.fc_w.size(); ++i) acc.fc_w[i] += g.fc_w[i];
    for (std::size_t i = 0; i < acc.fc_b.size(); ++i) acc.fc_b[i] += g.fc_b[i];
    for (std::size_t i = 0; i < acc.cls_w.size(); ++i) acc.cls_w[i] += g.cls_w[i];
}

void scale_grads(CnnGradients& g, double s) {
    for (ConvLayer& l : g.conv) {
        for (double& x : l.w) x *= s;
        for (double& x : l.b) x *= s;
    }
    for (double& x : g.fc_w) x *= s;
    for (double& x : g.fc_b) x *= s;
    for (double& x : g.cls_w) x *= s;
}

// Adds weight/bias gradients for one conv layer and, when dx is given, the
// gradient with respect to its input.
void conv_backward(const ConvLayer& layer, const Tensor3& x, const Tensor3& dpre,
                   ConvLayer& grad, Tensor3* dx) {
    const int p = layer.kernel / 2;
    const int out_ch = layer.out_ch;
    for (int r = 0; r < dpre.rows; ++r)
        for (int c = 0; c < dpre.cols; ++c) {
            const double* __restrict d = dpre.v.data() + dpre.index(r, c, 0);
            for (int oc = 0; oc < out_ch; ++oc) grad.b[oc] += d[oc];
            for (int ky = 0; ky < layer.kernel; ++ky) {
                const int rr = r + ky - p;
                if (rr < 0 || rr >= x.rows) continue;
                const int kx0 = std::max(0, p - c);
                const int kx1 = std::min(layer.kernel, x.cols + p - c);
                const int span = (kx1 - kx0) * layer.in_ch;
                const std::size_t w0 = layer.windex(ky, kx0, 0, 0);
                const double* xrow = x.v.data() + x.index(rr, c + kx0 - p, 0);
                double* __restrict wg = grad.w.data() + w0;
                for (int t = 0; t < span; ++t) {
                    const double xi = xrow[t];
                    double* __restrict wgr = wg + static_cast<std::size_t>(t) * out_ch;
                    for (int oc = 0; oc < out_ch; ++oc) wgr[oc] += xi * d[oc];
                }
                if (!dx) continue;
                const double* wv = layer.w.data() + w0;
                double* dxrow = dx->v.data() + dx->index(rr, c + kx0 - p, 0);
                for (int t = 0; t < span; ++t) {
                    const double* __restrict wvr = wv + static_cast<std::size_t>(t) * out_ch;
                    // Four fixed-order partial sums break the add latency chain.
                    double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
                    int oc = 0;
                    for (; oc + 4 <= out_ch; oc += 4) {
                        a0 += wvr[oc] * d[oc];
                        a1 += wvr[oc + 1] * d[oc + 1];
                        a2 += wvr[oc + 2] * d[oc + 2];
                        a3 += wvr[oc + 3] * d[oc + 3];
                    }
                    for (; oc < out_ch; ++oc) a0 += wvr[oc] * d[oc];
                    dxrow[t] += (a0 + a1) + (a2 + a3);
                }
            }
        }
}

// Forward + backward for one sample; gradients are added into `grad`.
// Returns the sample's cross-entropy loss.
double backprop(const CnnModel& m, const Tensor3& patch, int class_index, CnnGradients& grad) {
    const ForwardCache f = run_forward(m, patch);
    const std::size_t classes = m.class_ids.size();
    if (class_index < 0 || static_cast<std::size_t>(class_index) >= classes)
        throw ShapeError("class index " + std::to_string(class_index) + " out of range");
    const double loss = -std::log(std::max(f.probs[static_cast<std::size_t>(class_index)],
                                           kProbFloor));

    const std::size_t layers = m.conv.size();
    const std::size_t fc_width = m.fc_b.size();
    const Tensor3& flat = layer_input(f, layers, patch);

    // Softmax + cross-entropy: dz = p - onehot.
    std::vector<double> dz(f.probs);
    dz[static_cast<std::size_t>(class_index)] -= 1.0;

    // Classifier (bias-free): logits = h^T W.
    std::vector<double> dh(fc_width, 0.0);
    for (std::size_t k = 0; k < fc_width; ++k) {
        const double hk = f.h[k];
        double* gr = &grad.cls_w[k * classes];
        const double* wr = &m.cls_w[k * classes];
        double acc = 0.0;
        for (std::size_t c = 0; c < classes; ++c) {
            gr[c] += hk * dz[c];
            acc += wr[c] * dz[c];
        }
        dh[k] = f.h[k] > 0.0 ? acc : 0.0;  // through the fc rectifier
    }

    // Fully connected layer.
    Tensor3 dflat(flat.rows, flat.cols, flat.depth);
    for (std::size_t k = 0; k < fc_width; ++k) grad.fc_b[k] += dh[k];
    const double* __restrict dhp = dh.data();
    for (std::size_t i = 0; i < flat.v.size(); ++i) {
        const double xi = flat.v[i];
        double* __restrict gr = grad.fc_w.data() + i * fc_width;
        const double* __restrict wr = m.fc_w.data() + i * fc_width;
        for (std::size_t k = 0; k < fc_width; ++k) gr[k] += xi * dhp[k];
        double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
        std::size_t k = 0;
        for (; k + 4 <= fc_width; k += 4) {
            a0 += wr[k] * dhp[k];
            a1 += wr[k + 1] * dhp[k + 1];
            a2 += wr[k + 2] * dhp[k + 2];
            a3 += wr[k + 3] * dhp[k + 3];
        }
        for (; k < fc_width; ++k) a0 += wr[k] * dhp[k];
        dflat.v[i] = (a0 + a1) + (a2 + a3);
    }

    // Conv stack, top down.
    Tensor3 dact = std::move(dflat);
    for (std::size_t li = layers; li-- > 0;) {
        const int pl = f.pool_of_layer[li];
        if (pl >= 0) {
            // Route pooled gradients back to the selected maxima.
            const Tensor3& pre = f.conv_out[li];
            Tensor3 dpool(pre.rows, pre.cols, pre.depth);
            const std::vector<std::size_t>& src = f.pool_src[static_cast<std::size_t>(pl)];
            for (std::size_t i = 0; i < dact.v.size(); ++i) dpool.v[src[i]] += dact.v[i];
            dact = std::move(dpool);
        }
        // Through this layer's rectifier.
        const Tensor3& out = f.conv_out[li];
        for (std::size_t i = 0; i < dact.v.size(); ++i)
            if (!(out.v[i] > 0.0)) dact.v[i] = 0.0;

        const Tensor3& x = layer_input(f, li, patch);
        if (li == 0) {
            conv_backward(m.conv[li], x, dact, grad.conv[li], nullptr);
        } else {
            Tensor3 dx(x.rows, x.cols, x.depth);
            conv_backward(m.conv[li], x, dact, grad.conv[li], &dx);
            dact = std::move(dx);
        }
    }
    return loss;
}

void adam_update(CnnModel& model, CnnGradients& m1, CnnGradients& m2, const CnnGradients& g,
                 const CnnConfig& cfg, int t) {
    const double b1 = cfg.adam_beta1;
    const double b2 = cfg.adam_beta2;
    const double c1 = 1.0 - std::pow(b1, t);
    const double c2 = 1.0 - std::pow(b2, t);
    const auto update = [&](std::vector<double>& theta, std::vector<double>& m,
                            std::vector<double>& v, const std::vector<double>& grad) {
        for (std::size_t i = 0; i < theta.size(); ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * grad[i];
            v[i] = b2 * v[i] + (1.0 - b2) * grad[i] * grad[i];
            theta[i] -= cfg.learning_rate * (m[i] / c1) /
                        (std::sqrt(v[i] / c2) + cfg.adam_epsilon);
        }
    };
    for (std::size_t l = 0; l < model.conv.size(); ++l) {
        update(model.conv[l].w, m1.conv[l].w, m2.conv[l].w, g.conv[l].w);
        update(model.conv[l].b, m1.conv[l].b, m2.conv[l].b, g.conv[l].b);
    }
    update(model.fc_w, m1.fc_w, m2.fc_w, g.fc_w);
    update(model.fc_b, m1.fc_b, m2.fc_b, g.fc_b);
    update(model.cls_w, m1.cls_w, m2.cls_w, g.cls_w);
}

void quantize_model(CnnModel& m) {
    for (ConvLayer& l : m.conv) {
        quantize(l.w);
        quantize(l.b);
    }
    quantize(m.fc_w);
    quantize(m.fc_b);
    quantize(m.cls_w);
}

int argmax_class(const std::vector<double>& probs) {
    int best = 0;
    for (int c = 1; c < static_cast<int>(probs.size()); ++c)
        if (probs[static_cast<std::size_t>(c)] > probs[static_cast<std::size_t>(best)]) best = c;
    return best;
}

}  // namespace

// ---------------------------------------------------------------------------
// Public interface
// ---------------------------------------------------------------------------

void validate_cnn_config(const CnnConfig& cfg) { check_config(cfg); }

int cnn_output_side(const CnnConfig& cfg) {
    check_config(cfg);
    return final_side(cfg);
}

Tensor3 extract_patch(const FeatureField& field, int i, int j, int patch_size) {
    if (patch_size < 1 || patch_size % 2 == 0)
        throw ConfigError("patch size must be an odd positive integer");
    if (i < 0 || i >= field.height || j < 0 || j >= field.width)
        throw ShapeError("patch center (" + std::to_string(i) + ", " + std::to_string(j) +
                         ") outside the field");
    const int half = patch_size / 2;
    Tensor3 out(patch_size, patch_size, field.dim);
    for (int r = 0; r < patch_size; ++r) {
        const int sr = mirror_index(i + r - half, field.height);
        for (int c = 0; c < patch_size; ++c) {
            const int sc = mirror_index(j + c - half, field.width);
            const double* src = field.at(sr, sc);
            double* dst = &out.at(r, c, 0);
            for (int d = 0; d < field.dim; ++d) dst[d] = src[d];
        }
    }
    return out;
}

CnnModel init_cnn(const CnnConfig& cfg, int input_dim, std::vector<std::uint8_t> class_ids) {
    check_config(cfg);
    if (input_dim < 1) throw ConfigError("feature dimension must be positive");
    if (class_ids.size() < 2) throw NoLabels("classifier needs at least 2 classes");

    CnnModel m;
    m.cfg = cfg;
    m.input_dim = input_dim;
    m.class_ids = std::move(class_ids);

    Rng rng(substream_seed(cfg.seed, kInitStream));
    const auto xavier = [&rng](std::vector<double>& w, int fan_in, int fan_out) {
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (double& x : w) x = bound * (2.0 * rng.next_double() - 1.0);
    };

    int in_ch = input_dim;
    for (std::size_t l = 0; l < cfg.kernel_sizes.size(); ++l) {
        ConvLayer layer;
        layer.kernel = cfg.kernel_sizes[l];
        layer.in_ch = in_ch;
        layer.out_ch = cfg.channels[l];
        layer.w.resize(static_cast<std::size_t>(layer.kernel) * layer.kernel * layer.in_ch *
                       layer.out_ch);
        xavier(layer.w, layer.kernel * layer.kernel * layer.in_ch,
               layer.kernel * layer.kernel * layer.out_ch);
        layer.b.assign(static_cast<std::size_t>(layer.out_ch), 0.0);
        m.conv.push_back(std::move(layer));
        in_ch = cfg.channels[l];
    }

    const int side = final_side(cfg);
    const std::size_t fc_in = static_cast<std::size_t>(side) * side * in_ch;
    m.fc_w.resize(fc_in * static_cast<std::size_t>(cfg.fc_width));
    xavier(m.fc_w, static_cast<int>(fc_in), cfg.fc_width);
    m.fc_b.assign(static_cast<std::size_t>(cfg.fc_width), 0.0);
    m.cls_w.resize(static_cast<std::size_t>(cfg.fc_width) * m.class_ids.size());
    xavier(m.cls_w, cfg.fc_width, m.num_classes());

    quantize_model(m);
    return m;
}

std::vector<double> cnn_forward(const CnnModel& model, const Tensor3& patch) {
    return run_forward(model, patch).probs;
}

double cnn_loss(const std::vector<double>& probs, int class_index) {
    if (class_index < 0 || static_cast<std::size_t>(class_index) >= probs.size())
        throw ShapeError("class index " + std::to_string(class_index) + " out of range");
    return -std::log(std::max(probs[static_cast<std::size_t>(class_index)], kProbFloor));
}

CnnGradients cnn_backward(const CnnModel& model, const Tensor3& patch, int class_index) {
    CnnGradients g = zero_grads(model);
    backprop(model, patch, class_index, g);
    return g;
}

std::pair<CnnModel, TrainReport> train_cnn(const FeatureField& field, const LabelMap& labels,
                                           const CnnConfig& cfg) {
    if (field.height != labels.height || field.width != labels.width)
        throw ShapeError("label map " + std::to_string(labels.height) + "x" +
                         std::to_string(labels.width) + " does not match feature field " +
                         std::to_string(field.height) + "x" + std::to_string(field.width));
    const auto t0 = std::chrono::steady_clock::now();

    const std::vector<ClassIndexSet> sets =
        stratified_sample(labels, cfg.sample_fraction, cfg.seed);
    if (sets.size() < 2)
        throw NoLabels("training needs at least 2 labeled classes, found " +
                       std::to_string(sets.size()));

    std::vector<std::uint8_t> ids;
    std::vector<std::pair<std::size_t, int>> train_set;  // (pixel, class index)
    for (std::size_t c = 0; c < sets.size(); ++c) {
        ids.push_back(static_cast<std::uint8_t>(sets[c].class_id));
        for (std::size_t p : sets[c].pixels) train_set.emplace_back(p, static_cast<int>(c));
    }

    CnnModel model = init_cnn(cfg, field.dim, ids);
    CnnGradients m1 = zero_grads(model);
    CnnGradients m2 = zero_grads(model);
    Rng batch_rng(substream_seed(cfg.seed, kBatchStream));
    TrainReport report;
    report.step_losses.reserve(static_cast<std::size_t>(cfg.iterations));

    const auto batch_size = static_cast<std::size_t>(cfg.batch_size);
    for (int step = 0; step < cfg.iterations; ++step) {
        std::vector<std::size_t> batch(batch_size);
        for (std::size_t& b : batch) b = batch_rng.next_below(train_set.size());

        const std::size_t chunks = (batch_size + kGradChunk - 1) / kGradChunk;
        std::vector<CnnGradients> chunk_grads(chunks);
        std::vector<double> chunk_loss(chunks, 0.0);
        parallel_for(chunks, [&](std::size_t ch) {
            CnnGradients acc = zero_grads(model);
            double loss = 0.0;
            const std::size_t lo = ch * kGradChunk;
            const std::size_t hi = std::min(batch_size, lo + kGradChunk);
            for (std::size_t s = lo; s < hi; ++s) {
                const auto [pixel, class_index] = train_set[batch[s]];
                const Tensor3 patch =
                    extract_patch(field, static_cast<int>(pixel / field.width),
                                  static_cast<int>(pixel % field.width), cfg.patch_size);
                loss += backprop(model, patch, class_index, acc);
            }
            chunk_grads[ch] = std::move(acc);
            chunk_loss[ch] = loss;
        });

        CnnGradients total = std::move(chunk_grads[0]);
        double loss_sum = chunk_loss[0];
        for (std::size_t ch = 1; ch < chunks; ++ch) {
            add_grads(total, chunk_grads[ch]);
            loss_sum += chunk_loss[ch];
        }
        const double mean_loss = loss_sum / static_cast<double>(batch_size);
        if (!std::isfinite(mean_loss))
            throw DivergedLoss("training loss became non-finite at step " +
                               std::to_string(step + 1));
        report.step_losses.push_back(mean_loss);

        scale_grads(total, 1.0 / static_cast<double>(batch_size));
        adam_update(model, m1, m2, total, cfg, step + 1);
    }

    quantize_model(model);

    // Training accuracy of the final model over the sampled pixels.
    std::vector<std::uint8_t> hit(train_set.size(), 0);
    parallel_for(train_set.size(), [&](std::size_t s) {
        const auto [pixel, class_index] = train_set[s];
        const Tensor3 patch = extract_patch(field, static_cast<int>(pixel / field.width),
                                            static_cast<int>(pixel % field.width),
                                            cfg.patch_size);
        hit[s] = argmax_class(cnn_forward(model, patch)) == class_index ? 1 : 0;
    });
    std::size_t correct = 0;
    for (std::uint8_t h : hit) correct += h;
    report.final_train_accuracy =
        train_set.empty() ? 0.0
                          : static_cast<double>(correct) / static_cast<double>(train_set.size());
    report.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {std::move(model), std::move(report)};
}

LabelMap classify_field(const CnnModel& model, const FeatureField& field) {
    if (field.dim != model.input_dim)
        throw ShapeError("feature dimension " + std::to_string(field.dim) +
                         " does not match the model input " + std::to_string(model.input_dim));
    LabelMap out = LabelMap::zeros(field.height, field.width);
    const std::size_t pixels = static_cast<std::size_t>(field.height) * field.width;
    parallel_for(pixels, [&](std::size_t p) {
        const Tensor3 patch = extract_patch(field, static_cast<int>(p / field.width),
                                            static_cast<int>(p % field.width),
                                            model.cfg.patch_size);
        out.labels[p] = model.class_ids[static_cast<std::size_t>(
            argmax_class(cnn_forward(model, patch)))];
    });
    return out;
}

}  // namespace hpdnet
