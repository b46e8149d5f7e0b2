#include "evotext/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "evotext/errors.hpp"

namespace evotext {

namespace {

thread_local Tape* g_tape = nullptr;

std::string shape_str(const std::vector<std::size_t>& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << 'x';
        os << s[i];
    }
    os << ']';
    return os.str();
}

void record_op(const char* op, std::vector<TensorPtr> inputs, TensorPtr output,
               std::function<void()> fwd, std::function<void()> bwd) {
    bool req = false;
    for (const auto& in : inputs) req = req || in->requires_grad;
    output->requires_grad = req;
    if (g_tape) {
        g_tape->record({op, std::move(inputs), std::move(output), std::move(fwd), std::move(bwd)});
    }
}

}  // namespace

void Tensor::ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
}

void Tensor::zero_grad() {
    std::fill(grad.begin(), grad.end(), 0.0);
}

std::uint64_t Tensor::value_hash() const {
    return fnv1a64(data.data(), data.size() * sizeof(double));
}

TensorPtr Tensor::create(std::vector<std::size_t> shape, bool requires_grad) {
    auto t = std::make_shared<Tensor>();
    std::size_t n = 1;
    for (auto d : shape) {
        if (d == 0) throw ShapeError("Tensor::create: zero dimension in " + shape_str(shape));
        n *= d;
    }
    t->shape = std::move(shape);
    t->data.assign(n, 0.0);
    t->requires_grad = requires_grad;
    return t;
}

TensorPtr Tensor::from(std::vector<std::size_t> shape, std::vector<double> values,
                       bool requires_grad) {
    auto t = create(std::move(shape), requires_grad);
    if (values.size() != t->data.size()) {
        throw ShapeError("Tensor::from: " + std::to_string(values.size()) + " values for shape " +
                         shape_str(t->shape));
    }
    t->data = std::move(values);
    return t;
}

TensorPtr Tensor::scalar(double v, bool requires_grad) {
    return from({1}, {v}, requires_grad);
}

void Tape::replay() {
    for (auto& node : nodes_) node.forward();
}

Tape* active_tape() { return g_tape; }

TapeScope::TapeScope(Tape& tape) : prev_(g_tape) { g_tape = &tape; }
TapeScope::~TapeScope() { g_tape = prev_; }

void backward(const TensorPtr& loss, Tape& tape) {
    if (!loss->is_scalar()) {
        throw ContractError("backward: loss must be a scalar, got shape " + shape_str(loss->shape));
    }
    // Intermediate grads are reset per sweep; leaf grads persist and accumulate.
    for (auto& node : tape.nodes()) {
        node.output->ensure_grad();
        node.output->zero_grad();
    }
    loss->ensure_grad();
    loss->grad[0] = 1.0;
    const auto& nodes = tape.nodes();
    for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
        if (it->output->requires_grad) it->backward();
    }
}

// ---- ops -----------------------------------------------------------------

TensorPtr matmul(const TensorPtr& a, const TensorPtr& b) {
    if (a->cols() != b->rows()) {
        throw ShapeError("matmul: inner dimensions disagree, " + shape_str(a->shape) + " vs " +
                         shape_str(b->shape));
    }
    const std::size_t m = a->rows(), k = a->cols(), n = b->cols();
    auto out = Tensor::create({m, n});
    auto fwd = [a, b, out, m, k, n] {
        std::fill(out->data.begin(), out->data.end(), 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t p = 0; p < k; ++p) {
                const double av = a->data[i * k + p];
                const double* brow = &b->data[p * n];
                double* orow = &out->data[i * n];
                for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
            }
        }
    };
    fwd();
    auto bwd = [a, b, out, m, k, n] {
        if (a->requires_grad) {
            a->ensure_grad();
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    const double g = out->grad[i * n + j];
                    if (g == 0.0) continue;
                    const double* brow = &b->data[j];  // column j, stride n
                    for (std::size_t p = 0; p < k; ++p) {
                        a->grad[i * k + p] += g * brow[p * n];
                    }
                }
            }
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (std::size_t p = 0; p < k; ++p) {
                for (std::size_t i = 0; i < m; ++i) {
                    const double av = a->data[i * k + p];
                    if (av == 0.0) continue;
                    const double* grow = &out->grad[i * n];
                    double* brow = &b->grad[p * n];
                    for (std::size_t j = 0; j < n; ++j) brow[j] += av * grow[j];
                }
            }
        }
    };
    record_op("matmul", {a, b}, out, fwd, bwd);
    return out;
}

TensorPtr transpose(const TensorPtr& a) {
    const std::size_t m = a->rows(), n = a->cols();
    auto out = Tensor::create({n, m});
    auto fwd = [a, out, m, n] {
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) out->data[j * m + i] = a->data[i * n + j];
    };
    fwd();
    auto bwd = [a, out, m, n] {
        if (!a->requires_grad) return;
        a->ensure_grad();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) a->grad[i * n + j] += out->grad[j * m + i];
    };
    record_op("transpose", {a}, out, fwd, bwd);
    return out;
}

TensorPtr add(const TensorPtr& a, const TensorPtr& b) {
    if (a->shape != b->shape) {
        throw ShapeError("add: shapes disagree, " + shape_str(a->shape) + " vs " +
                         shape_str(b->shape));
    }
    auto out = Tensor::create(a->shape);
    auto fwd = [a, b, out] {
        for (std::size_t i = 0; i < out->size(); ++i) out->data[i] = a->data[i] + b->data[i];
    };
    fwd();
    auto bwd = [a, b, out] {
        for (const auto& t : {a, b}) {
            if (!t->requires_grad) continue;
            t->ensure_grad();
            for (std::size_t i = 0; i < out->size(); ++i) t->grad[i] += out->grad[i];
        }
    };
    record_op("add", {a, b}, out, fwd, bwd);
    return out;
}

TensorPtr add_row_broadcast(const TensorPtr& a, const TensorPtr& bias) {
    const std::size_t m = a->rows(), n = a->cols();
    if (bias->size() != n) {
        throw ShapeError("add_row_broadcast: bias " + shape_str(bias->shape) +
                         " does not match row width of " + shape_str(a->shape));
    }
    auto out = Tensor::create(a->shape);
    auto fwd = [a, bias, out, m, n] {
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j)
                out->data[i * n + j] = a->data[i * n + j] + bias->data[j];
    };
    fwd();
    auto bwd = [a, bias, out, m, n] {
        if (a->requires_grad) {
            a->ensure_grad();
            for (std::size_t i = 0; i < out->size(); ++i) a->grad[i] += out->grad[i];
        }
        if (bias->requires_grad) {
            bias->ensure_grad();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) bias->grad[j] += out->grad[i * n + j];
        }
    };
    record_op("add_row_broadcast", {a, bias}, out, fwd, bwd);
    return out;
}

TensorPtr mul_elems(const TensorPtr& a, const TensorPtr& b) {
    if (a->shape != b->shape) {
        throw ShapeError("mul_elems: shapes disagree, " + shape_str(a->shape) + " vs " +
                         shape_str(b->shape));
    }
    auto out = Tensor::create(a->shape);
    auto fwd = [a, b, out] {
        for (std::size_t i = 0; i < out->size(); ++i) out->data[i] = a->data[i] * b->data[i];
    };
    fwd();
    auto bwd = [a, b, out] {
        if (a->requires_grad) {
            a->ensure_grad();
            for (std::size_t i = 0; i < out->size(); ++i) a->grad[i] += out->grad[i] * b->data[i];
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (std::size_t i = 0; i < out->size(); ++i) b->grad[i] += out->grad[i] * a->data[i];
        }
    };
    record_op("mul_elems", {a, b}, out, fwd, bwd);
    return out;
}

TensorPtr scale(const TensorPtr& a, double c) {
    auto out = Tensor::create(a->shape);
    auto fwd = [a, out, c] {
        for (std::size_t i = 0; i < out->size(); ++i) out->data[i] = a->data[i] * c;
    };
    fwd();
    auto bwd = [a, out, c] {
        if (!a->requires_grad) return;
        a->ensure_grad();
        for (std::size_t i = 0; i < out->size(); ++i) a->grad[i] += out->grad[i] * c;
    };
    record_op("scale", {a}, out, fwd, bwd);
    return out;
}

TensorPtr gelu(const TensorPtr& a) {
    auto out = Tensor::create(a->shape);
    constexpr double inv_sqrt2 = 0.7071067811865475244;
    constexpr double inv_sqrt2pi = 0.3989422804014326779;
    auto fwd = [a, out] {
        for (std::size_t i = 0; i < out->size(); ++i) {
            const double x = a->data[i];
            out->data[i] = 0.5 * x * (1.0 + std::erf(x * inv_sqrt2));
        }
    };
    fwd();
    auto bwd = [a, out] {
        if (!a->requires_grad) return;
        a->ensure_grad();
        for (std::size_t i = 0; i < out->size(); ++i) {
            const double x = a->data[i];
            const double cdf = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
            const double pdf = inv_sqrt2pi * std::exp(-0.5 * x * x);
            a->grad[i] += out->grad[i] * (cdf + x * pdf);
        }
    };
    record_op("gelu", {a}, out, fwd, bwd);
    return out;
}

TensorPtr tensor_sum(const TensorPtr& a) {
    auto out = Tensor::create({1});
    auto fwd = [a, out] {
        out->data[0] = std::accumulate(a->data.begin(), a->data.end(), 0.0);
    };
    fwd();
    auto bwd = [a, out] {
        if (!a->requires_grad) return;
        a->ensure_grad();
        for (std::size_t i = 0; i < a->size(); ++i) a->grad[i] += out->grad[0];
    };
    record_op("sum", {a}, out, fwd, bwd);
    return out;
}

TensorPtr softmax_rows(const TensorPtr& x, const AttnMask* mask) {
    const std::size_t m = x->rows(), n = x->cols();
    std::vector<std::uint8_t> allow;
    if (mask) {
        if (mask->rows != m || mask->cols != n) {
            throw ShapeError("softmax_rows: mask " + std::to_string(mask->rows) + "x" +
                             std::to_string(mask->cols) + " does not match " +
                             shape_str(x->shape));
        }
        allow = mask->allow;
        for (std::size_t i = 0; i < m; ++i) {
            bool any = false;
            for (std::size_t j = 0; j < n; ++j) any = any || allow[i * n + j];
            if (!any) {
                throw ContractError("softmax_rows: row " + std::to_string(i) +
                                    " has every entry masked");
            }
        }
    }
    auto out = Tensor::create(x->shape);
    auto fwd = [x, out, allow, m, n] {
        for (std::size_t i = 0; i < m; ++i) {
            const double* row = &x->data[i * n];
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < n; ++j) {
                if (!allow.empty() && !allow[i * n + j]) continue;
                mx = std::max(mx, row[j]);
            }
            double denom = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                double e = 0.0;
                if (allow.empty() || allow[i * n + j]) e = std::exp(row[j] - mx);
                out->data[i * n + j] = e;
                denom += e;
            }
            for (std::size_t j = 0; j < n; ++j) out->data[i * n + j] /= denom;
        }
    };
    fwd();
    auto bwd = [x, out, m, n] {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (std::size_t i = 0; i < m; ++i) {
            const double* y = &out->data[i * n];
            const double* dy = &out->grad[i * n];
            double dot = 0.0;
            for (std::size_t j = 0; j < n; ++j) dot += dy[j] * y[j];
            for (std::size_t j = 0; j < n; ++j) x->grad[i * n + j] += y[j] * (dy[j] - dot);
        }
    };
    record_op("softmax_rows", {x}, out, fwd, bwd);
    return out;
}

TensorPtr layer_norm(const TensorPtr& x, const TensorPtr& gain, const TensorPtr& bias,
                     double eps) {
    const std::size_t m = x->rows(), d = x->cols();
    if (gain->size() != d || bias->size() != d) {
        throw ShapeError("layer_norm: gain/bias width must match " + shape_str(x->shape));
    }
    if (eps <= 0.0) throw ContractError("layer_norm: eps must be > 0");
    auto out = Tensor::create(x->shape);
    struct Saved {
        std::vector<double> xhat;
        std::vector<double> inv_std;
    };
    auto saved = std::make_shared<Saved>();
    auto fwd = [x, gain, bias, out, saved, m, d, eps] {
        saved->xhat.assign(m * d, 0.0);
        saved->inv_std.assign(m, 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            const double* row = &x->data[i * d];
            double mean = 0.0;
            for (std::size_t j = 0; j < d; ++j) mean += row[j];
            mean /= static_cast<double>(d);
            double var = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double c = row[j] - mean;
                var += c * c;
            }
            var /= static_cast<double>(d);
            const double inv = 1.0 / std::sqrt(var + eps);
            saved->inv_std[i] = inv;
            for (std::size_t j = 0; j < d; ++j) {
                const double xh = (row[j] - mean) * inv;
                saved->xhat[i * d + j] = xh;
                out->data[i * d + j] = gain->data[j] * xh + bias->data[j];
            }
        }
    };
    fwd();
    auto bwd = [x, gain, bias, out, saved, m, d] {
        for (std::size_t i = 0; i < m; ++i) {
            const double* dy = &out->grad[i * d];
            const double* xh = &saved->xhat[i * d];
            if (gain->requires_grad) {
                gain->ensure_grad();
                for (std::size_t j = 0; j < d; ++j) gain->grad[j] += dy[j] * xh[j];
            }
            if (bias->requires_grad) {
                bias->ensure_grad();
                for (std::size_t j = 0; j < d; ++j) bias->grad[j] += dy[j];
            }
            if (x->requires_grad) {
                x->ensure_grad();
                double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
                for (std::size_t j = 0; j < d; ++j) {
                    const double dxh = dy[j] * gain->data[j];
                    sum_dxhat += dxh;
                    sum_dxhat_xhat += dxh * xh[j];
                }
                const double inv = saved->inv_std[i];
                const double dn = static_cast<double>(d);
                for (std::size_t j = 0; j < d; ++j) {
                    const double dxh = dy[j] * gain->data[j];
                    x->grad[i * d + j] +=
                        inv / dn * (dn * dxh - sum_dxhat - xh[j] * sum_dxhat_xhat);
                }
            }
        }
    };
    record_op("layer_norm", {x, gain, bias}, out, fwd, bwd);
    return out;
}

TensorPtr cross_entropy_from_logits(const TensorPtr& logits,
                                    const std::vector<std::size_t>& targets,
                                    const std::vector<std::uint8_t>* row_select) {
    const std::size_t m = logits->rows(), c = logits->cols();
    if (targets.size() != m) {
        throw ShapeError("cross_entropy_from_logits: " + std::to_string(targets.size()) +
                         " targets for " + std::to_string(m) + " rows");
    }
    std::vector<std::uint8_t> sel(m, 1);
    if (row_select) {
        if (row_select->size() != m) {
            throw ShapeError("cross_entropy_from_logits: row_select length mismatch");
        }
        sel = *row_select;
    }
    std::size_t n_sel = 0;
    for (std::size_t i = 0; i < m; ++i) {
        if (!sel[i]) continue;
        ++n_sel;
        if (targets[i] >= c) {
            throw IndexError("cross_entropy_from_logits: target " + std::to_string(targets[i]) +
                             " out of range [0," + std::to_string(c) + ") at row " +
                             std::to_string(i));
        }
    }
    if (n_sel == 0) throw ContractError("cross_entropy_from_logits: no rows selected");
    auto out = Tensor::create({1});
    auto probs = std::make_shared<std::vector<double>>();
    auto fwd = [logits, out, probs, targets, sel, m, c, n_sel] {
        probs->assign(m * c, 0.0);
        double total = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            if (!sel[i]) continue;
            const double* row = &logits->data[i * c];
            double mx = row[0];
            for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
            double denom = 0.0;
            for (std::size_t j = 0; j < c; ++j) denom += std::exp(row[j] - mx);
            const double lse = mx + std::log(denom);
            total += lse - row[targets[i]];
            for (std::size_t j = 0; j < c; ++j) {
                (*probs)[i * c + j] = std::exp(row[j] - lse);
            }
        }
        out->data[0] = total / static_cast<double>(n_sel);
    };
    fwd();
    auto bwd = [logits, out, probs, targets, sel, m, c, n_sel] {
        if (!logits->requires_grad) return;
        logits->ensure_grad();
        const double g = out->grad[0] / static_cast<double>(n_sel);
        for (std::size_t i = 0; i < m; ++i) {
            if (!sel[i]) continue;
            for (std::size_t j = 0; j < c; ++j) {
                double p = (*probs)[i * c + j];
                if (j == targets[i]) p -= 1.0;
                logits->grad[i * c + j] += g * p;
            }
        }
    };
    record_op("cross_entropy", {logits}, out, fwd, bwd);
    return out;
}

TensorPtr embed_rows(const TensorPtr& table, const std::vector<std::size_t>& indices) {
    const std::size_t v = table->rows(), d = table->cols();
    for (std::size_t id : indices) {
        if (id >= v) {
            throw IndexError("embed_rows: index " + std::to_string(id) + " out of range [0," +
                             std::to_string(v) + ")");
        }
    }
    const std::size_t n = indices.size();
    auto out = Tensor::create({n, d});
    auto fwd = [table, out, indices, d] {
        for (std::size_t i = 0; i < indices.size(); ++i) {
            std::copy_n(&table->data[indices[i] * d], d, &out->data[i * d]);
        }
    };
    fwd();
    auto bwd = [table, out, indices, d] {
        if (!table->requires_grad) return;
        table->ensure_grad();
        for (std::size_t i = 0; i < indices.size(); ++i) {
            for (std::size_t j = 0; j < d; ++j) {
                table->grad[indices[i] * d + j] += out->grad[i * d + j];
            }
        }
    };
    record_op("embed_rows", {table}, out, fwd, bwd);
    return out;
}

TensorPtr concat_cols(const std::vector<TensorPtr>& parts) {
    if (parts.empty()) throw ContractError("concat_cols: empty input");
    const std::size_t m = parts[0]->rows();
    std::size_t total = 0;
    for (const auto& p : parts) {
        if (p->rows() != m) throw ShapeError("concat_cols: row counts disagree");
        total += p->cols();
    }
    auto out = Tensor::create({m, total});
    auto fwd = [parts, out, m, total] {
        std::size_t off = 0;
        for (const auto& p : parts) {
            const std::size_t w = p->cols();
            for (std::size_t i = 0; i < m; ++i) {
                std::copy_n(&p->data[i * w], w, &out->data[i * total + off]);
            }
            off += w;
        }
    };
    fwd();
    auto bwd = [parts, out, m, total] {
        std::size_t off = 0;
        for (const auto& p : parts) {
            const std::size_t w = p->cols();
            if (p->requires_grad) {
                p->ensure_grad();
                for (std::size_t i = 0; i < m; ++i) {
                    for (std::size_t j = 0; j < w; ++j) {
                        p->grad[i * w + j] += out->grad[i * total + off + j];
                    }
                }
            }
            off += w;
        }
    };
    record_op("concat_cols", parts, out, fwd, bwd);
    return out;
}

TensorPtr mean_rows(const TensorPtr& x, const std::vector<std::uint8_t>& row_select) {
    const std::size_t m = x->rows(), d = x->cols();
    if (row_select.size() != m) throw ShapeError("mean_rows: row_select length mismatch");
    std::size_t n_sel = 0;
    for (auto s : row_select) n_sel += s ? 1 : 0;
    if (n_sel == 0) throw ContractError("mean_rows: no rows selected");
    auto out = Tensor::create({1, d});
    auto fwd = [x, out, row_select, m, d, n_sel] {
        std::fill(out->data.begin(), out->data.end(), 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            if (!row_select[i]) continue;
            for (std::size_t j = 0; j < d; ++j) out->data[j] += x->data[i * d + j];
        }
        for (std::size_t j = 0; j < d; ++j) out->data[j] /= static_cast<double>(n_sel);
    };
    fwd();
    auto bwd = [x, out, row_select, m, d, n_sel] {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (std::size_t i = 0; i < m; ++i) {
            if (!row_select[i]) continue;
            for (std::size_t j = 0; j < d; ++j) {
                x->grad[i * d + j] += out->grad[j] / static_cast<double>(n_sel);
            }
        }
    };
    record_op("mean_rows", {x}, out, fwd, bwd);
    return out;
}

TensorPtr seeded_init(std::vector<std::size_t> shape, InitScheme scheme, std::uint64_t seed) {
    auto t = Tensor::create(std::move(shape));
    switch (scheme) {
        case InitScheme::zeros:
            break;
        case InitScheme::ones:
            std::fill(t->data.begin(), t->data.end(), 1.0);
            break;
        case InitScheme::uniform_scaled: {
            Rng rng(seed);
            const double bound = 1.0 / std::sqrt(static_cast<double>(t->shape[0]));
            for (auto& v : t->data) v = rng.uniform(-bound, bound);
            break;
        }
    }
    return t;
}

}  // namespace evotext
