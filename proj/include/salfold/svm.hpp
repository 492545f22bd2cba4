#ifndef SALFOLD_SVM_HPP
#define SALFOLD_SVM_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "salfold/error.hpp"
#include "salfold/util.hpp"

namespace salfold {

enum class KernelKind { rbf, linear };

struct SvmParams {
    double C = 1.0;
    double gamma = 0.0;        // <= 0 means 1/dimension, resolved at train time
    double tolerance = 1e-3;   // KKT violation threshold (stopping gap)
    long max_iterations = 10'000'000;
    KernelKind kernel = KernelKind::rbf;
    std::size_t cache_budget_bytes = 256u << 20; // full Gram cache below this
};

inline double kernel_eval(KernelKind kind, double gamma, const double* x, const double* z,
                          std::size_t dims) {
    if (kind == KernelKind::linear) {
        double dot = 0.0;
        for (std::size_t d = 0; d < dims; ++d) dot += x[d] * z[d];
        return dot;
    }
    double sq = 0.0;
    for (std::size_t d = 0; d < dims; ++d) {
        const double diff = x[d] - z[d];
        sq += diff * diff;
    }
    return std::exp(-gamma * sq);
}

// ----------------------------------------------------------------- BinaryModel

/// One-vs-one member: support vectors with dual coefficients alpha_i * y_i
/// and bias b; decision f(x) = sum coeff_i K(sv_i, x) + b. Positive decisions
/// vote for class_a.
struct BinaryModel {
    int class_a = 0; // trained as +1
    int class_b = 0; // trained as -1
    double bias = 0.0;
    std::size_t dims = 0;
    std::vector<double> coeffs;      // alpha_i * y_i, nonzero only
    std::vector<double> sv_values;   // coeffs.size() x dims, row-major

    // training diagnostics, not persisted
    long iterations = 0;
    bool converged = true;

    const double* sv(std::size_t i) const { return sv_values.data() + i * dims; }
    std::size_t sv_count() const { return coeffs.size(); }

    double decision(const double* x, KernelKind kind, double gamma) const {
        double f = bias;
        for (std::size_t i = 0; i < sv_count(); ++i)
            f += coeffs[i] * kernel_eval(kind, gamma, sv(i), x, dims);
        return f;
    }
};

// ------------------------------------------------------------------ SMO core

namespace detail {

/// Kernel rows either from a fully cached Gram matrix or recomputed on
/// demand when n*n doubles would exceed the configured budget.
class KernelSource {
public:
    KernelSource(const double* x, std::size_t n, std::size_t dims, KernelKind kind, double gamma,
                 std::size_t budget_bytes)
        : x_(x), n_(n), dims_(dims), kind_(kind), gamma_(gamma) {
        diag_.resize(n_);
        for (std::size_t i = 0; i < n_; ++i)
            diag_[i] = kernel_eval(kind_, gamma_, row_x(i), row_x(i), dims_);
        if (n_ * n_ * sizeof(double) <= budget_bytes) {
            cache_.resize(n_ * n_);
            for (std::size_t i = 0; i < n_; ++i) {
                for (std::size_t j = 0; j <= i; ++j) {
                    const double k = kernel_eval(kind_, gamma_, row_x(i), row_x(j), dims_);
                    cache_[i * n_ + j] = k;
                    cache_[j * n_ + i] = k;
                }
            }
        } else {
            scratch_a_.resize(n_);
            scratch_b_.resize(n_);
        }
    }

    double diag(std::size_t i) const { return diag_[i]; }

    const double* row(std::size_t i, int slot) {
        if (!cache_.empty()) return cache_.data() + i * n_;
        auto& buf = (slot == 0) ? scratch_a_ : scratch_b_;
        auto& idx = (slot == 0) ? scratch_a_idx_ : scratch_b_idx_;
        if (idx != static_cast<std::ptrdiff_t>(i)) {
            for (std::size_t j = 0; j < n_; ++j)
                buf[j] = kernel_eval(kind_, gamma_, row_x(i), row_x(j), dims_);
            idx = static_cast<std::ptrdiff_t>(i);
        }
        return buf.data();
    }

private:
    const double* row_x(std::size_t i) const { return x_ + i * dims_; }

    const double* x_;
    std::size_t n_, dims_;
    KernelKind kind_;
    double gamma_;
    std::vector<double> diag_;
    std::vector<double> cache_;
    std::vector<double> scratch_a_, scratch_b_;
    std::ptrdiff_t scratch_a_idx_ = -1, scratch_b_idx_ = -1;
};

} // namespace detail

struct SmoResult {
    std::vector<double> alpha;
    double bias = 0.0;
    double dual_objective = 0.0; // value of sum(alpha) - 1/2 a'Qa at the solution
    long iterations = 0;
    bool converged = false;
};

/// Sequential minimal optimization for the soft-margin dual
///   min 1/2 a'Qa - e'a,  0 <= a <= C,  y'a = 0,  Q_ij = y_i y_j K_ij.
/// Working pairs are chosen by the second-order rule: the first index
/// maximizes the KKT violation over I_up, the second maximizes the
/// guaranteed objective decrease over I_low. Stops when the violating-pair
/// gap drops to `tolerance` or the iteration cap is reached.
inline SmoResult smo_solve(const double* x, const std::vector<int>& y, std::size_t dims,
                           const SvmParams& params, double gamma) {
    const std::size_t n = y.size();
    detail::KernelSource kernel(x, n, dims, params.kernel, gamma, params.cache_budget_bytes);
    const double C = params.C;
    const double tau = 1e-12;

    SmoResult res;
    res.alpha.assign(n, 0.0);
    std::vector<double> grad(n, -1.0); // G = Qa - e, a = 0

    auto in_up = [&](std::size_t t) {
        return (y[t] > 0 && res.alpha[t] < C) || (y[t] < 0 && res.alpha[t] > 0.0);
    };
    auto in_low = [&](std::size_t t) {
        return (y[t] > 0 && res.alpha[t] > 0.0) || (y[t] < 0 && res.alpha[t] < C);
    };
    auto violation = [&](std::size_t t) { return -y[t] * grad[t]; };

    long iter = 0;
    for (; iter < params.max_iterations; ++iter) {
        // first index: maximal violation over I_up
        std::ptrdiff_t i = -1;
        double m_up = -std::numeric_limits<double>::infinity();
        double m_low = std::numeric_limits<double>::infinity();
        for (std::size_t t = 0; t < n; ++t) {
            if (in_up(t) && violation(t) > m_up) {
                m_up = violation(t);
                i = static_cast<std::ptrdiff_t>(t);
            }
            if (in_low(t)) m_low = std::min(m_low, violation(t));
        }
        if (i < 0 || m_up - m_low <= params.tolerance) {
            res.converged = true;
            break;
        }

        const double* k_i = kernel.row(static_cast<std::size_t>(i), 0);
        const double k_ii = kernel.diag(static_cast<std::size_t>(i));

        // second index: maximal b^2/a decrease over I_low
        std::ptrdiff_t j = -1;
        double best = -1.0;
        for (std::size_t t = 0; t < n; ++t) {
            if (!in_low(t)) continue;
            const double b_t = m_up - violation(t);
            if (b_t <= 0.0) continue;
            double a_t = k_ii + kernel.diag(t) - 2.0 * k_i[t];
            if (a_t <= tau) a_t = tau;
            const double score = b_t * b_t / a_t;
            if (score > best) {
                best = score;
                j = static_cast<std::ptrdiff_t>(t);
            }
        }
        if (j < 0) { // numerically stalled; the gap test above is the certificate
            res.converged = true;
            break;
        }

        const std::size_t ii = static_cast<std::size_t>(i), jj = static_cast<std::size_t>(j);
        const double b_ij = m_up - violation(jj);
        double a_ij = k_ii + kernel.diag(jj) - 2.0 * k_i[jj];
        if (a_ij <= tau) a_ij = tau;

        // step along (y_i e_i - y_j e_j); caps keep both alphas inside the box
        const double cap_i = (y[ii] > 0) ? C - res.alpha[ii] : res.alpha[ii];
        const double cap_j = (y[jj] > 0) ? res.alpha[jj] : C - res.alpha[jj];
        const double d = std::min({b_ij / a_ij, cap_i, cap_j});

        const double new_ai = (d == cap_i) ? (y[ii] > 0 ? C : 0.0) : res.alpha[ii] + y[ii] * d;
        const double new_aj = (d == cap_j) ? (y[jj] > 0 ? 0.0 : C) : res.alpha[jj] - y[jj] * d;
        res.alpha[ii] = std::min(std::max(new_ai, 0.0), C);
        res.alpha[jj] = std::min(std::max(new_aj, 0.0), C);

        const double* k_j = kernel.row(jj, 1);
        for (std::size_t t = 0; t < n; ++t) grad[t] += y[t] * d * (k_i[t] - k_j[t]);
    }
    res.iterations = iter;

    // bias: mean over free support vectors, else midpoint of the final bounds
    double free_sum = 0.0;
    std::size_t free_count = 0;
    double m_up = -std::numeric_limits<double>::infinity();
    double m_low = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < n; ++t) {
        if (res.alpha[t] > 0.0 && res.alpha[t] < C) {
            free_sum += violation(t);
            ++free_count;
        }
        if (in_up(t)) m_up = std::max(m_up, violation(t));
        if (in_low(t)) m_low = std::min(m_low, violation(t));
    }
    if (free_count > 0)
        res.bias = free_sum / static_cast<double>(free_count);
    else
        res.bias = (m_up + m_low) / 2.0;

    double obj = 0.0;
    for (std::size_t t = 0; t < n; ++t) obj += res.alpha[t] * (1.0 - 0.5 * (grad[t] + 1.0));
    res.dual_objective = obj;
    return res;
}

// ------------------------------------------------------------- binary training

/// Trains one soft-margin binary classifier. `y` entries must be -1 or +1.
inline BinaryModel train_binary(const double* x, const std::vector<int>& y, std::size_t dims,
                                const SvmParams& params) {
    const std::size_t n = y.size();
    bool has_pos = false, has_neg = false;
    for (int v : y) {
        if (v > 0) has_pos = true;
        else has_neg = true;
    }
    if (!has_pos || !has_neg) raise(Errc::single_class_input, "need samples of both signs");
    for (std::size_t i = 0; i < n * dims; ++i)
        if (!std::isfinite(x[i])) raise(Errc::non_finite_feature, "non-finite feature value");

    const double gamma = params.gamma > 0.0 ? params.gamma : 1.0 / static_cast<double>(dims);
    const SmoResult sol = smo_solve(x, y, dims, params, gamma);

    BinaryModel model;
    model.dims = dims;
    model.bias = sol.bias;
    model.iterations = sol.iterations;
    model.converged = sol.converged;
    for (std::size_t i = 0; i < n; ++i) {
        if (sol.alpha[i] > 0.0) {
            model.coeffs.push_back(sol.alpha[i] * y[i]);
            model.sv_values.insert(model.sv_values.end(), x + i * dims, x + (i + 1) * dims);
        }
    }
    return model;
}

// --------------------------------------------------------------- multi-class

/// Unordered class pairs (a < b) in lexicographic order: the training and
/// voting order of the one-vs-one decomposition.
inline std::vector<std::pair<int, int>> class_pairs(int n_classes) {
    std::vector<std::pair<int, int>> out;
    out.reserve(static_cast<std::size_t>(n_classes) * (n_classes - 1) / 2);
    for (int a = 0; a < n_classes; ++a)
        for (int b = a + 1; b < n_classes; ++b) out.emplace_back(a, b);
    return out;
}

struct MultiClassModel {
    std::size_t dims = 0;
    int n_classes = 0;
    KernelKind kernel = KernelKind::rbf;
    double gamma = 0.0; // resolved value actually used
    double C = 1.0;
    std::string fingerprint;             // LBP extraction settings
    std::vector<std::string> class_names; // label table, index -> name
    std::vector<BinaryModel> binaries;    // class_pairs order
};

/// One binary model per unordered class pair, each trained on that pair's
/// samples only. Deterministic given the input order; pairs may be trained
/// in parallel.
inline MultiClassModel train_multiclass(const double* x, const std::vector<int>& labels,
                                        std::size_t dims, int n_classes, const SvmParams& params,
                                        int threads = 1) {
    if (n_classes < 2) raise(Errc::single_class_input, "need at least 2 classes");
    for (int l : labels)
        if (l < 0 || l >= n_classes) raise(Errc::dimension_mismatch, "label outside class table");

    MultiClassModel model;
    model.dims = dims;
    model.n_classes = n_classes;
    model.kernel = params.kernel;
    model.C = params.C;
    model.gamma = params.gamma > 0.0 ? params.gamma : 1.0 / static_cast<double>(dims);

    const auto pairs = class_pairs(n_classes);
    model.binaries.resize(pairs.size());
    SvmParams resolved = params;
    resolved.gamma = model.gamma;

    parallel_for(pairs.size(), threads, [&](std::size_t p) {
        const auto [a, b] = pairs[p];
        std::vector<double> sub_x;
        std::vector<int> sub_y;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] == a || labels[i] == b) {
                sub_x.insert(sub_x.end(), x + i * dims, x + (i + 1) * dims);
                sub_y.push_back(labels[i] == a ? +1 : -1);
            }
        }
        BinaryModel bin = train_binary(sub_x.data(), sub_y, dims, resolved);
        bin.class_a = a;
        bin.class_b = b;
        model.binaries[p] = std::move(bin);
    });
    return model;
}

/// One-vs-one majority vote. Ties go to the tied class with the largest sum
/// of |decision| over the models it won; remaining ties to the lowest index.
inline int predict(const MultiClassModel& model, const double* x, std::size_t dims) {
    if (dims != model.dims)
        raise(Errc::dimension_mismatch, "query has " + std::to_string(dims) +
                                            " dims, model expects " + std::to_string(model.dims));
    std::vector<int> votes(static_cast<std::size_t>(model.n_classes), 0);
    std::vector<double> margin(static_cast<std::size_t>(model.n_classes), 0.0);
    for (const auto& bin : model.binaries) {
        const double f = bin.decision(x, model.kernel, model.gamma);
        const int winner = (f >= 0.0) ? bin.class_a : bin.class_b;
        votes[static_cast<std::size_t>(winner)] += 1;
        margin[static_cast<std::size_t>(winner)] += std::abs(f);
    }
    int best = 0;
    for (int c = 1; c < model.n_classes; ++c) {
        const std::size_t cc = static_cast<std::size_t>(c), bb = static_cast<std::size_t>(best);
        if (votes[cc] > votes[bb] || (votes[cc] == votes[bb] && margin[cc] > margin[bb]))
            best = c;
    }
    return best;
}

// -------------------------------------------------------------- persistence

inline void save_model(const MultiClassModel& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(Errc::io_error, "cannot write " + path);
    out << "salfold-model 1\n";
    out << "kernel " << (m.kernel == KernelKind::rbf ? "rbf" : "linear") << " gamma "
        << fmt_double(m.gamma) << " C " << fmt_double(m.C) << "\n";
    out << "fingerprint " << m.fingerprint << "\n";
    out << "dims " << m.dims << "\n";
    out << "classes " << m.n_classes << "\n";
    for (const auto& name : m.class_names) out << name << "\n";
    out << "binary_models " << m.binaries.size() << "\n";
    for (const auto& bin : m.binaries) {
        out << "pair " << bin.class_a << " " << bin.class_b << " bias " << fmt_double(bin.bias)
            << " svs " << bin.sv_count() << "\n";
        for (std::size_t i = 0; i < bin.sv_count(); ++i) {
            out << fmt_double(bin.coeffs[i]);
            const double* sv = bin.sv(i);
            for (std::size_t d = 0; d < bin.dims; ++d) out << " " << fmt_double(sv[d]);
            out << "\n";
        }
    }
    if (!out) raise(Errc::io_error, "short write to " + path);
}

inline MultiClassModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(Errc::unreadable_file, path);
    auto corrupt = [&](const std::string& why) -> void {
        raise(Errc::corrupt_model_file, path + ": " + why);
    };
    std::string magic, key, kern;
    int version = 0;
    in >> magic >> version;
    if (magic != "salfold-model" || version != 1) corrupt("bad header");
    MultiClassModel m;
    in >> key >> kern;
    if (key != "kernel") corrupt("missing kernel");
    if (kern == "rbf")
        m.kernel = KernelKind::rbf;
    else if (kern == "linear")
        m.kernel = KernelKind::linear;
    else
        corrupt("unknown kernel '" + kern + "'");
    in >> key >> m.gamma;
    if (key != "gamma" || !in) corrupt("missing gamma");
    in >> key >> m.C;
    if (key != "C" || !in) corrupt("missing C");
    in >> key >> m.fingerprint;
    if (key != "fingerprint" || !in) corrupt("missing fingerprint");
    in >> key >> m.dims;
    if (key != "dims" || !in) corrupt("missing dims");
    in >> key >> m.n_classes;
    if (key != "classes" || !in || m.n_classes < 1) corrupt("missing classes");
    m.class_names.resize(static_cast<std::size_t>(m.n_classes));
    for (auto& name : m.class_names)
        if (!(in >> name)) corrupt("truncated class table");
    std::size_t n_bin = 0;
    in >> key >> n_bin;
    if (key != "binary_models" || !in) corrupt("missing binary model count");
    m.binaries.resize(n_bin);
    for (auto& bin : m.binaries) {
        std::size_t svs = 0;
        in >> key >> bin.class_a >> bin.class_b;
        if (key != "pair" || !in) corrupt("bad pair record");
        in >> key >> bin.bias;
        if (key != "bias" || !in) corrupt("bad bias record");
        in >> key >> svs;
        if (key != "svs" || !in) corrupt("bad sv count");
        bin.dims = m.dims;
        bin.coeffs.resize(svs);
        bin.sv_values.resize(svs * m.dims);
        for (std::size_t i = 0; i < svs; ++i) {
            if (!(in >> bin.coeffs[i])) corrupt("truncated coefficients");
            for (std::size_t d = 0; d < m.dims; ++d)
                if (!(in >> bin.sv_values[i * m.dims + d])) corrupt("truncated support vector");
        }
    }
    return m;
}

} // namespace salfold

#endif
