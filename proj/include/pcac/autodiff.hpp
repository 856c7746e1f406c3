#pragma once

#include <deque>
#include <functional>
#include <memory>

#include "pcac/conv.hpp"
#include "pcac/params.hpp"

namespace pcac {

// ---------------------------------------------------------------------------
// Reverse-mode tape over feature matrices. Values are double in memory
// (parameters stay f32 in their stores); every reduction accumulates in
// double and every loop runs in a fixed order, so training trajectories are
// bit-reproducible for any worker count.
// ---------------------------------------------------------------------------

struct Var {
    int32_t id = -1;
    bool valid() const { return id >= 0; }
};

struct FocalConfig {
    double xi = 2.0;
    double sigma_occupied = 0.75;
    double sigma_empty = 0.25;
};

class Tape {
  public:
    bool training = true;

    // --- leaves ---------------------------------------------------------

    Var leaf(std::vector<double> v, int rows, int cols) {
        if ((size_t)rows * cols != v.size()) fail(ErrorKind::ShapeMismatch, "leaf size mismatch");
        Var out = alloc(rows, cols);
        node(out).val = std::move(v);
        return out;
    }

    Var scalar_leaf(double v) { return leaf({v}, 1, 1); }

    // parameter leaf; grads flow back into Parameter::grad on backward().
    // Shape: dims[0] x prod(dims[1:]) so matrix parameters keep their rows.
    Var param(Parameter& p) {
        int rows = p.dims.empty() ? 1 : (int)p.dims[0];
        int cols = rows ? (int)(p.size() / rows) : 0;
        Var out = alloc(rows, cols);
        auto& n = node(out);
        n.val.assign(p.value.begin(), p.value.end());
        n.bound = &p;
        param_nodes_.push_back(out.id);
        return out;
    }

    // --- shape ops ------------------------------------------------------

    Var gather_rows(Var x, std::shared_ptr<const std::vector<int32_t>> rows) {
        auto& xn = node(x);
        int cols = xn.cols;
        Var out = alloc((int)rows->size(), cols);
        auto& on = node(out);
        for (size_t k = 0; k < rows->size(); ++k)
            std::copy_n(xn.val.begin() + (size_t)(*rows)[k] * cols, cols, on.val.begin() + k * cols);
        node(out).backward = [x, out, rows, cols](Tape& t) {
            auto& gx = t.node(x).grad;
            const auto& go = t.node(out).grad;
            for (size_t k = 0; k < rows->size(); ++k)
                for (int c = 0; c < cols; ++c) gx[(size_t)(*rows)[k] * cols + c] += go[k * cols + c];
        };
        return out;
    }

    Var slice_cols(Var x, int c0, int c1) {
        auto& xn = node(x);
        if (c0 < 0 || c1 > xn.cols || c0 >= c1) fail(ErrorKind::ShapeMismatch, "bad column slice");
        int rows = xn.rows, in_cols = xn.cols, w = c1 - c0;
        Var out = alloc(rows, w);
        auto& on = node(out);
        for (int r = 0; r < rows; ++r)
            std::copy_n(xn.val.begin() + (size_t)r * in_cols + c0, w, on.val.begin() + (size_t)r * w);
        node(out).backward = [x, out, c0, in_cols, w, rows](Tape& t) {
            auto& gx = t.node(x).grad;
            const auto& go = t.node(out).grad;
            for (int r = 0; r < rows; ++r)
                for (int c = 0; c < w; ++c) gx[(size_t)r * in_cols + c0 + c] += go[(size_t)r * w + c];
        };
        return out;
    }

    // --- pointwise ------------------------------------------------------

    Var relu(Var x) {
        Var out = alloc_like(x);
        auto& xn = node(x);
        auto& on = node(out);
        for (size_t i = 0; i < xn.val.size(); ++i) on.val[i] = xn.val[i] > 0 ? xn.val[i] : 0.0;
        node(out).backward = [x, out](Tape& t) {
            const auto& xv = t.node(x).val;
            const auto& go = t.node(out).grad;
            auto& gx = t.node(x).grad;
            for (size_t i = 0; i < xv.size(); ++i)
                if (xv[i] > 0) gx[i] += go[i];
        };
        return out;
    }

    Var sigmoid(Var x) {
        Var out = alloc_like(x);
        auto& xn = node(x);
        auto& on = node(out);
        for (size_t i = 0; i < xn.val.size(); ++i) {
            double v = xn.val[i];
            on.val[i] = v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
        }
        node(out).backward = [x, out](Tape& t) {
            const auto& ov = t.node(out).val;
            const auto& go = t.node(out).grad;
            auto& gx = t.node(x).grad;
            for (size_t i = 0; i < ov.size(); ++i) gx[i] += go[i] * ov[i] * (1.0 - ov[i]);
        };
        return out;
    }

    Var clamp01(Var x) {
        Var out = alloc_like(x);
        auto& xn = node(x);
        auto& on = node(out);
        for (size_t i = 0; i < xn.val.size(); ++i) on.val[i] = std::clamp(xn.val[i], 0.0, 1.0);
        node(out).backward = [x, out](Tape& t) {
            const auto& xv = t.node(x).val;
            const auto& go = t.node(out).grad;
            auto& gx = t.node(x).grad;
            for (size_t i = 0; i < xv.size(); ++i)
                if (xv[i] > 0.0 && xv[i] < 1.0) gx[i] += go[i];
        };
        return out;
    }

    // round-to-nearest-even forward, identity gradient (straight-through)
    Var round_ste(Var x) {
        Var out = alloc_like(x);
        auto& xn = node(x);
        auto& on = node(out);
        for (size_t i = 0; i < xn.val.size(); ++i) on.val[i] = std::nearbyint(xn.val[i]);
        node(out).backward = [x, out](Tape& t) {
            const auto& go = t.node(out).grad;
            auto& gx = t.node(x).grad;
            for (size_t i = 0; i < go.size(); ++i) gx[i] += go[i];
        };
        return out;
    }

    // inverted dropout: scales kept activations by 1/(1-rate); identity in
    // eval mode and at rate 0
    Var dropout(Var x, double rate, Rng& rng) {
        if (!training || rate <= 0.0) return x;
        auto mask = std::make_shared<std::vector<double>>(node(x).val.size());
        double scale = 1.0 / (1.0 - rate);
        for (auto& m : *mask) m = rng.uniform() >= rate ? scale : 0.0;
        Var out = alloc_like(x);
        auto& xn = node(x);
        auto& on = node(out);
        for (size_t i = 0; i < xn.val.size(); ++i) on.val[i] = xn.val[i] * (*mask)[i];
        node(out).backward = [x, out, mask](Tape& t) {
            const auto& go = t.node(out).grad;
            auto& gx = t.node(x).grad;
            for (size_t i = 0; i < go.size(); ++i) gx[i] += go[i] * (*mask)[i];
        };
        return out;
    }

    // --- sparse convolution ----------------------------------------------
    // weights: param var viewed as [offset][in_ch][out_ch]; bias: [out_ch].
    // The kernel map fixes the coordinate structure; this node only moves
    // features. Used for both forward and transposed convolutions.

    Var conv(Var x, Var w, Var b, std::shared_ptr<const KernelMap> km, int in_ch, int out_ch) {
        auto& xn = node(x);
        if (xn.cols != in_ch) fail(ErrorKind::ShapeMismatch, "conv input channel mismatch");
        if (xn.rows != km->n_in) fail(ErrorKind::ShapeMismatch, "conv input row mismatch");
        size_t want_w = (size_t)km->pairs.size() * in_ch * out_ch;
        if (node(w).val.size() != want_w) fail(ErrorKind::ShapeMismatch, "conv weight size mismatch");
        if (node(b).val.size() != (size_t)out_ch) fail(ErrorKind::ShapeMismatch, "conv bias size mismatch");

        Var out = alloc(km->n_out, out_ch);
        auto adj = std::make_shared<conv_detail::OutAdjacency>(conv_detail::to_out_adjacency(*km));

        {
            auto& on = node(out);
            const double* wv = node(w).val.data();
            const double* bv = node(b).val.data();
            const double* xv = node(x).val.data();
            double* ov = on.val.data();
            parallel_for(km->n_out, [&](int64_t o) {
                std::vector<double> acc(bv, bv + out_ch);
                for (int32_t e = adj->row_start[o]; e < adj->row_start[o + 1]; ++e) {
                    auto [od, i] = adj->at[e];
                    const double* wo = wv + (size_t)od * in_ch * out_ch;
                    const double* f = xv + (size_t)i * in_ch;
                    for (int ic = 0; ic < in_ch; ++ic) {
                        double fv = f[ic];
                        const double* wrow = wo + (size_t)ic * out_ch;
                        for (int oc = 0; oc < out_ch; ++oc) acc[oc] += fv * wrow[oc];
                    }
                }
                std::copy(acc.begin(), acc.end(), ov + (size_t)o * out_ch);
            });
        }

        node(out).backward = [x, w, b, out, km, adj, in_ch, out_ch](Tape& t) {
            const auto& go = t.node(out).grad;
            const auto& xv = t.node(x).val;
            const auto& wv = t.node(w).val;
            auto& gx = t.node(x).grad;
            auto& gw = t.node(w).grad;
            auto& gb = t.node(b).grad;

            // d/d input via the input-side adjacency (built on demand)
            conv_detail::OutAdjacency in_adj;
            in_adj.row_start.assign(km->n_in + 1, 0);
            for (const auto& list : km->pairs)
                for (const auto& [i, o] : list) in_adj.row_start[i + 1]++;
            for (int32_t i = 0; i < km->n_in; ++i) in_adj.row_start[i + 1] += in_adj.row_start[i];
            in_adj.at.resize(in_adj.row_start[km->n_in]);
            std::vector<int32_t> cursor(in_adj.row_start.begin(), in_adj.row_start.end() - 1);
            for (int od = 0; od < (int)km->pairs.size(); ++od)
                for (const auto& [i, o] : km->pairs[od]) in_adj.at[cursor[i]++] = {od, o};

            parallel_for(km->n_in, [&](int64_t i) {
                std::vector<double> acc(in_ch, 0.0);
                for (int32_t e = in_adj.row_start[i]; e < in_adj.row_start[i + 1]; ++e) {
                    auto [od, o] = in_adj.at[e];
                    const double* wo = wv.data() + (size_t)od * in_ch * out_ch;
                    const double* g = go.data() + (size_t)o * out_ch;
                    for (int ic = 0; ic < in_ch; ++ic) {
                        const double* wrow = wo + (size_t)ic * out_ch;
                        double s = 0;
                        for (int oc = 0; oc < out_ch; ++oc) s += wrow[oc] * g[oc];
                        acc[ic] += s;
                    }
                }
                for (int ic = 0; ic < in_ch; ++ic) gx[(size_t)i * in_ch + ic] += acc[ic];
            });

            // d/d weights: offsets are disjoint weight slices, safe to split
            parallel_for((int64_t)km->pairs.size(), [&](int64_t od) {
                double* gwo = gw.data() + (size_t)od * in_ch * out_ch;
                for (const auto& [i, o] : km->pairs[od]) {
                    const double* f = xv.data() + (size_t)i * in_ch;
                    const double* g = go.data() + (size_t)o * out_ch;
                    for (int ic = 0; ic < in_ch; ++ic) {
                        double fv = f[ic];
                        double* grow = gwo + (size_t)ic * out_ch;
                        for (int oc = 0; oc < out_ch; ++oc) grow[oc] += fv * g[oc];
                    }
                }
            });

            for (int32_t o = 0; o < km->n_out; ++o)
                for (int oc = 0; oc < out_ch; ++oc) gb[oc] += go[(size_t)o * out_ch + oc];
        };
        return out;
    }

    // --- dense head -------------------------------------------------------

    // N x C -> 1 x C column means; the variable-size "flatten"
    Var global_mean_rows(Var x) {
        auto& xn = node(x);
        int rows = xn.rows, cols = xn.cols;
        if (rows == 0) fail(ErrorKind::ShapeMismatch, "global mean of empty tensor");
        Var out = alloc(1, cols);
        auto& on = node(out);
        for (int c = 0; c < cols; ++c) {
            double acc = 0;
            for (int r = 0; r < rows; ++r) acc += xn.val[(size_t)r * cols + c];
            on.val[c] = acc / rows;
        }
        node(out).backward = [x, out, rows, cols](Tape& t) {
            const auto& go = t.node(out).grad;
            auto& gx = t.node(x).grad;
            for (int r = 0; r < rows; ++r)
                for (int c = 0; c < cols; ++c) gx[(size_t)r * cols + c] += go[c] / rows;
        };
        return out;
    }

    // x: 1 x C, w: [C x M] flat, b: [M] -> 1 x M
    Var affine(Var x, Var w, Var b) {
        auto& xn = node(x);
        int C = xn.cols;
        int M = (int)node(b).val.size();
        if (xn.rows != 1) fail(ErrorKind::ShapeMismatch, "affine expects a single row");
        if (node(w).val.size() != (size_t)C * M) fail(ErrorKind::ShapeMismatch, "affine weight mismatch");
        Var out = alloc(1, M);
        auto& on = node(out);
        for (int m = 0; m < M; ++m) {
            double acc = node(b).val[m];
            for (int c = 0; c < C; ++c) acc += xn.val[c] * node(w).val[(size_t)c * M + m];
            on.val[m] = acc;
        }
        node(out).backward = [x, w, b, out, C, M](Tape& t) {
            const auto& go = t.node(out).grad;
            const auto& xv = t.node(x).val;
            const auto& wv = t.node(w).val;
            auto& gx = t.node(x).grad;
            auto& gw = t.node(w).grad;
            auto& gb = t.node(b).grad;
            for (int m = 0; m < M; ++m) gb[m] += go[m];
            for (int c = 0; c < C; ++c) {
                double s = 0;
                for (int m = 0; m < M; ++m) {
                    s += wv[(size_t)c * M + m] * go[m];
                    gw[(size_t)c * M + m] += xv[c] * go[m];
                }
                gx[c] += s;
            }
        };
        return out;
    }

    // --- losses -----------------------------------------------------------

    static constexpr double kProbEps = 1e-7;

    // mean squared error against a constant target
    Var mse(Var x, std::shared_ptr<const std::vector<double>> target) {
        auto& xn = node(x);
        if (xn.val.size() != target->size()) fail(ErrorKind::ShapeMismatch, "mse target size mismatch");
        if (xn.val.empty()) fail(ErrorKind::ShapeMismatch, "mse of empty tensor");
        Var out = alloc(1, 1);
        double acc = 0;
        for (size_t i = 0; i < xn.val.size(); ++i) {
            double d = xn.val[i] - (*target)[i];
            acc += d * d;
        }
        size_t n = xn.val.size();
        node(out).val[0] = acc / (double)n;
        node(out).backward = [x, out, target, n](Tape& t) {
            double g = t.node(out).grad[0];
            const auto& xv = t.node(x).val;
            auto& gx = t.node(x).grad;
            for (size_t i = 0; i < xv.size(); ++i) gx[i] += g * 2.0 * (xv[i] - (*target)[i]) / (double)n;
        };
        return out;
    }

    // binary cross-entropy, mean over entries; probabilities clamped to
    // [eps, 1-eps] before the logs
    Var bce(Var p, std::shared_ptr<const std::vector<double>> labels) {
        auto& pn = node(p);
        if (pn.val.size() != labels->size()) fail(ErrorKind::ShapeMismatch, "bce label size mismatch");
        if (pn.val.empty()) fail(ErrorKind::ShapeMismatch, "bce of empty tensor");
        Var out = alloc(1, 1);
        size_t n = pn.val.size();
        double acc = 0;
        for (size_t i = 0; i < n; ++i) {
            double ph = std::clamp(pn.val[i], kProbEps, 1.0 - kProbEps);
            double y = (*labels)[i];
            acc += -y * std::log(ph) - (1.0 - y) * std::log(1.0 - ph);
        }
        node(out).val[0] = acc / (double)n;
        node(out).backward = [p, out, labels, n](Tape& t) {
            double g = t.node(out).grad[0];
            const auto& pv = t.node(p).val;
            auto& gp = t.node(p).grad;
            for (size_t i = 0; i < n; ++i) {
                if (pv[i] <= kProbEps || pv[i] >= 1.0 - kProbEps) continue;  // saturated
                double y = (*labels)[i];
                gp[i] += g * (-y / pv[i] + (1.0 - y) / (1.0 - pv[i])) / (double)n;
            }
        };
        return out;
    }

    // sigma-balanced focal loss on occupancy logits, summed over voxels:
    //   sum_w -sigma_w (1 - p_w^t)^xi log p_w^t
    Var focal(Var logits, std::shared_ptr<const std::vector<uint8_t>> occupied, FocalConfig cfg) {
        auto& zn = node(logits);
        if (zn.val.size() != occupied->size()) fail(ErrorKind::AlignmentError, "focal label size mismatch");
        Var out = alloc(1, 1);
        size_t n = zn.val.size();
        double acc = 0;
        for (size_t i = 0; i < n; ++i) {
            double p = 1.0 / (1.0 + std::exp(-zn.val[i]));
            double pt = (*occupied)[i] ? p : 1.0 - p;
            pt = std::clamp(pt, kProbEps, 1.0 - kProbEps);
            double sigma = (*occupied)[i] ? cfg.sigma_occupied : cfg.sigma_empty;
            acc += -sigma * std::pow(1.0 - pt, cfg.xi) * std::log(pt);
        }
        node(out).val[0] = acc;
        node(out).backward = [logits, out, occupied, cfg, n](Tape& t) {
            double g = t.node(out).grad[0];
            const auto& zv = t.node(logits).val;
            auto& gz = t.node(logits).grad;
            for (size_t i = 0; i < n; ++i) {
                double p = 1.0 / (1.0 + std::exp(-zv[i]));
                double sign = (*occupied)[i] ? 1.0 : -1.0;
                double pt = std::clamp((*occupied)[i] ? p : 1.0 - p, kProbEps, 1.0 - kProbEps);
                double sigma = (*occupied)[i] ? cfg.sigma_occupied : cfg.sigma_empty;
                double one_m = 1.0 - pt;
                double dl_dpt = sigma * ((cfg.xi == 0.0 ? 0.0 : cfg.xi * std::pow(one_m, cfg.xi - 1.0) * std::log(pt)) -
                                         std::pow(one_m, cfg.xi) / pt);
                gz[i] += g * dl_dpt * sign * p * (1.0 - p);
            }
        };
        return out;
    }

    // -log(p) and -log(1-p) on scalars, for the adversarial terms
    Var neg_log(Var p) { return neg_log_impl(p, false); }
    Var neg_log1m(Var p) { return neg_log_impl(p, true); }

    // Estimated code length in bits of quantized values under the
    // per-channel Laplace model with unit bins. Differentiable w.r.t. the
    // values (continuous bin-probability relaxation, the straight-through
    // path) and w.r.t. the raw scale parameters (scale = 1e-6 + softplus(s)).
    Var rate_bits(Var q, Var raw_scales) {
        auto& qn = node(q);
        int C = qn.cols;
        if ((int)node(raw_scales).val.size() != C)
            fail(ErrorKind::ShapeMismatch, "one scale parameter per channel required");
        Var out = alloc(1, 1);
        std::vector<double> b(C), db_ds(C);
        for (int c = 0; c < C; ++c) {
            double s = std::min(node(raw_scales).val[c], 60.0);
            double sp = s > 30 ? s : std::log1p(std::exp(s));
            b[c] = 1e-6 + sp;
            db_ds[c] = 1.0 / (1.0 + std::exp(-s));
        }
        double acc = 0;
        for (int32_t r = 0; r < qn.rows; ++r)
            for (int c = 0; c < C; ++c) acc += laplace_bits(qn.val[(size_t)r * C + c], b[c]);
        node(out).val[0] = acc;

        int rows = qn.rows;
        node(out).backward = [q, raw_scales, out, b, db_ds, rows, C](Tape& t) {
            double g = t.node(out).grad[0];
            const auto& qv = t.node(q).val;
            auto& gq = t.node(q).grad;
            auto& gs = t.node(raw_scales).grad;
            for (int32_t r = 0; r < rows; ++r)
                for (int c = 0; c < C; ++c) {
                    auto [dx, db] = laplace_bits_grad(qv[(size_t)r * C + c], b[c]);
                    gq[(size_t)r * C + c] += g * dx;
                    gs[c] += g * db * db_ds[c];
                }
        };
        return out;
    }

    // scalar linear combination sum_k coeff_k * v_k
    Var lincomb(const std::vector<std::pair<double, Var>>& terms) {
        Var out = alloc(1, 1);
        double acc = 0;
        for (const auto& [a, v] : terms) {
            if (node(v).val.size() != 1) fail(ErrorKind::ShapeMismatch, "lincomb expects scalars");
            acc += a * node(v).val[0];
        }
        node(out).val[0] = acc;
        auto terms_copy = std::make_shared<std::vector<std::pair<double, Var>>>(terms);
        node(out).backward = [out, terms_copy](Tape& t) {
            double g = t.node(out).grad[0];
            for (const auto& [a, v] : *terms_copy) t.node(v).grad[0] += a * g;
        };
        return out;
    }

    // --- driving ----------------------------------------------------------

    double value(Var v) const { return nodes_[v.id].val[0]; }
    const std::vector<double>& values(Var v) const { return nodes_[v.id].val; }
    const std::vector<double>& grads(Var v) const { return nodes_[v.id].grad; }
    int rows(Var v) const { return nodes_[v.id].rows; }
    int cols(Var v) const { return nodes_[v.id].cols; }

    // accumulates d loss / d value into every node and every bound Parameter
    void backward(Var loss) {
        if (!loss.valid() || loss.id >= (int32_t)nodes_.size())
            fail(ErrorKind::DetachedLoss, "loss is not a node of this tape");
        if (nodes_[loss.id].val.size() != 1) fail(ErrorKind::DetachedLoss, "loss must be scalar");
        for (auto& n : nodes_) n.grad.assign(n.val.size(), 0.0);
        nodes_[loss.id].grad[0] = 1.0;
        for (int32_t i = loss.id; i >= 0; --i)
            if (nodes_[i].backward) nodes_[i].backward(*this);
        for (int32_t id : param_nodes_) {
            auto& n = nodes_[id];
            for (size_t i = 0; i < n.grad.size(); ++i) n.bound->grad[i] += (float)n.grad[i];
        }
    }

    size_t node_count() const { return nodes_.size(); }

  private:
    struct TapeNode {
        int rows = 0, cols = 0;
        std::vector<double> val, grad;
        Parameter* bound = nullptr;
        std::function<void(Tape&)> backward;
    };

    // deque: references to nodes stay valid while the tape grows
    std::deque<TapeNode> nodes_;
    std::vector<int32_t> param_nodes_;

    TapeNode& node(Var v) { return nodes_[v.id]; }

    Var alloc(int rows, int cols) {
        TapeNode n;
        n.rows = rows;
        n.cols = cols;
        n.val.assign((size_t)rows * cols, 0.0);
        nodes_.push_back(std::move(n));
        return Var{(int32_t)nodes_.size() - 1};
    }

    Var alloc_like(Var x) { return alloc(node(x).rows, node(x).cols); }

    Var neg_log_impl(Var p, bool one_minus) {
        auto& pn = node(p);
        if (pn.val.size() != 1) fail(ErrorKind::ShapeMismatch, "neg_log expects a scalar");
        Var out = alloc(1, 1);
        double ph = std::clamp(pn.val[0], kProbEps, 1.0 - kProbEps);
        node(out).val[0] = -std::log(one_minus ? 1.0 - ph : ph);
        node(out).backward = [p, out, one_minus](Tape& t) {
            double pv = t.node(p).val[0];
            if (pv <= kProbEps || pv >= 1.0 - kProbEps) return;
            double g = t.node(out).grad[0];
            t.node(p).grad[0] += g * (one_minus ? 1.0 / (1.0 - pv) : -1.0 / pv);
        };
        return out;
    }

    // -log2 P(x) with P the width-1 Laplace bin probability, evaluated as a
    // continuous function of x; stable in the log domain for far tails
    static double laplace_bits(double x, double b) {
        double ax = std::abs(x);
        constexpr double kLn2 = 0.6931471805599453;
        if (ax >= 0.5) {
            double ln_p = std::log(0.5) - (ax - 0.5) / b + std::log1p(-std::exp(-1.0 / b));
            return -ln_p / kLn2;
        }
        double p = 1.0 - 0.5 * std::exp(-(x + 0.5) / b) - 0.5 * std::exp(-(0.5 - x) / b);
        return -std::log(std::max(p, 1e-300)) / kLn2;
    }

    // (d bits / d x, d bits / d b)
    static std::pair<double, double> laplace_bits_grad(double x, double b) {
        double ax = std::abs(x);
        constexpr double kLn2 = 0.6931471805599453;
        if (ax >= 0.5) {
            double t = std::exp(-1.0 / b);
            double dlnp_dax = -1.0 / b;
            double dlnp_db = (ax - 0.5) / (b * b) - t / (b * b * (1.0 - t));
            double dx = -dlnp_dax / kLn2 * (x < 0 ? -1.0 : 1.0);
            return {dx, -dlnp_db / kLn2};
        }
        double e1 = std::exp(-(x + 0.5) / b), e2 = std::exp(-(0.5 - x) / b);
        double p = std::max(1.0 - 0.5 * e1 - 0.5 * e2, 1e-300);
        double dp_dx = 0.5 * e1 / b - 0.5 * e2 / b;
        double dp_db = -0.5 * e1 * (x + 0.5) / (b * b) - 0.5 * e2 * (0.5 - x) / (b * b);
        return {-dp_dx / (p * kLn2), -dp_db / (p * kLn2)};
    }
};

}  // namespace pcac
