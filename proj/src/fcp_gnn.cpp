#include "phylo/fcp_gnn.hpp"

#include "phylo/error.hpp"

#include <cmath>
#include <iostream>
#include <random>

namespace phylo {

using Eigen::ArrayXXd;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd sigmoid(const MatrixXd& z) { return (1.0 / (1.0 + (-z.array()).exp())).matrix(); }

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

MatrixXd apply_activation(const MatrixXd& z, Activation a) {
    switch (a) {
        case Activation::Identity: return z;
        case Activation::Tanh: return z.array().tanh().matrix();
        case Activation::Relu: return z.cwiseMax(0.0);
    }
    return z;
}

// d act / d z evaluated from the pre-activation, multiplied into grad.
MatrixXd activation_backward(const MatrixXd& grad, const MatrixXd& pre, Activation a) {
    switch (a) {
        case Activation::Identity: return grad;
        case Activation::Tanh: return (grad.array() * (1.0 - pre.array().tanh().square())).matrix();
        case Activation::Relu: return (grad.array() * (pre.array() > 0.0).cast<double>()).matrix();
    }
    return grad;
}

void require(bool ok, const std::string& what) {
    if (!ok) throw ValidationError(what);
}

void check_cheb(const MatrixXd& x, const SparseMatrix& lap, const ChebLayerParams& p) {
    require(!p.theta.empty(), "Chebyshev layer needs at least one coefficient matrix");
    require(lap.rows() == x.rows() && lap.cols() == x.rows(), "Laplacian size does not match node count");
    for (const auto& t : p.theta) {
        require(t.rows() == x.cols() && t.cols() == p.out_dim(), "Chebyshev weight shape mismatch");
    }
    require(p.bias.size() == p.out_dim(), "Chebyshev bias shape mismatch");
}

// T_0 X .. T_K X via the three-term recurrence.
std::vector<MatrixXd> chebyshev_terms(const MatrixXd& x, const SparseMatrix& lap, int order) {
    std::vector<MatrixXd> terms;
    terms.reserve(static_cast<std::size_t>(order) + 1);
    terms.push_back(x);
    if (order >= 1) terms.push_back(lap * x);
    for (int k = 2; k <= order; ++k) {
        const auto uk = static_cast<std::size_t>(k);
        terms.push_back(2.0 * (lap * terms[uk - 1]) - terms[uk - 2]);
    }
    return terms;
}

MatrixXd cheb_combine(const std::vector<MatrixXd>& terms, const ChebLayerParams& p) {
    MatrixXd out = terms[0] * p.theta[0];
    for (std::size_t k = 1; k < terms.size(); ++k) out.noalias() += terms[k] * p.theta[k];
    out.rowwise() += p.bias;
    return out;
}

void check_lstm_direction(const LstmDirectionParams& p, Index f, Index h) {
    require(p.w_ih.rows() == 4 * h && p.w_ih.cols() == f, "LSTM input weight shape mismatch");
    require(p.w_hh.rows() == 4 * h && p.w_hh.cols() == h, "LSTM recurrent weight shape mismatch");
    require(p.bias.size() == 4 * h, "LSTM bias shape mismatch");
}

// Runs one direction over seq in the given timestep order, filling dir.
void lstm_direction_forward(const Sequence& seq, const LstmDirectionParams& p, bool reverse,
                            ForwardTrace::Direction& dir) {
    const Index n = seq.front().rows();
    const Index h = p.w_hh.cols();
    const std::size_t steps = seq.size();
    MatrixXd h_prev = MatrixXd::Zero(n, h);
    MatrixXd c_prev = MatrixXd::Zero(n, h);
    for (std::size_t s = 0; s < steps; ++s) {
        const std::size_t t = reverse ? steps - 1 - s : s;
        MatrixXd z = seq[t] * p.w_ih.transpose();
        z.noalias() += h_prev * p.w_hh.transpose();
        z.rowwise() += p.bias.transpose();
        MatrixXd i = sigmoid(z.middleCols(0, h));
        MatrixXd f = sigmoid(z.middleCols(h, h));
        MatrixXd g = z.middleCols(2 * h, h).array().tanh().matrix();
        MatrixXd o = sigmoid(z.middleCols(3 * h, h));
        MatrixXd c = (f.array() * c_prev.array() + i.array() * g.array()).matrix();
        MatrixXd tc = c.array().tanh().matrix();
        MatrixXd hh = (o.array() * tc.array()).matrix();
        h_prev = hh;
        c_prev = c;
        dir.i.push_back(std::move(i));
        dir.f.push_back(std::move(f));
        dir.g.push_back(std::move(g));
        dir.o.push_back(std::move(o));
        dir.c.push_back(std::move(c));
        dir.tanh_c.push_back(std::move(tc));
        dir.h.push_back(std::move(hh));
    }
}

// grad_h[t] is dLoss/dh at chronological timestep t for this direction.
// Accumulates into grad_seq (chronological) and the direction's gradients.
void lstm_direction_backward(const Sequence& seq, const LstmDirectionParams& p, bool reverse,
                             const ForwardTrace::Direction& dir, const Sequence& grad_h,
                             LstmDirectionParams& grad, Sequence& grad_seq) {
    const Index n = seq.front().rows();
    const Index h = p.w_hh.cols();
    const std::size_t steps = seq.size();
    MatrixXd dh_next = MatrixXd::Zero(n, h);
    MatrixXd dc_next = MatrixXd::Zero(n, h);
    MatrixXd dz(n, 4 * h);
    for (std::size_t s = steps; s-- > 0;) {
        const std::size_t t = reverse ? steps - 1 - s : s;
        const ArrayXXd dh = (grad_h[t] + dh_next).array();
        const ArrayXXd o = dir.o[s].array();
        const ArrayXXd tc = dir.tanh_c[s].array();
        const ArrayXXd i = dir.i[s].array();
        const ArrayXXd f = dir.f[s].array();
        const ArrayXXd g = dir.g[s].array();
        const ArrayXXd dc = dc_next.array() + dh * o * (1.0 - tc.square());
        const MatrixXd c_prev = s > 0 ? dir.c[s - 1] : MatrixXd::Zero(n, h);
        const MatrixXd h_prev = s > 0 ? dir.h[s - 1] : MatrixXd::Zero(n, h);
        dz.middleCols(0, h) = (dc * g * i * (1.0 - i)).matrix();
        dz.middleCols(h, h) = (dc * c_prev.array() * f * (1.0 - f)).matrix();
        dz.middleCols(2 * h, h) = (dc * i * (1.0 - g.square())).matrix();
        dz.middleCols(3 * h, h) = (dh * tc * o * (1.0 - o)).matrix();
        grad.w_ih.noalias() += dz.transpose() * seq[t];
        grad.w_hh.noalias() += dz.transpose() * h_prev;
        grad.bias += dz.colwise().sum().transpose();
        grad_seq[t].noalias() += dz * p.w_ih;
        dh_next.noalias() = dz * p.w_hh;
        dc_next = (dc * f).matrix();
    }
}

class UniformSource {
public:
    explicit UniformSource(std::uint64_t seed) : rng_(seed) {}
    // Uniform on [-1, 1), computed from raw engine bits so results do not
    // depend on the standard library's distribution implementation.
    double symmetric() {
        const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
        return 2.0 * u - 1.0;
    }

private:
    std::mt19937_64 rng_;
};

void glorot(MatrixXd& m, Index fan_in, Index fan_out, UniformSource& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (Index r = 0; r < m.rows(); ++r) {
        for (Index c = 0; c < m.cols(); ++c) m(r, c) = limit * rng.symmetric();
    }
}

} // namespace

ScaledLaplacian build_laplacian(const PhyloGraph& graph) { return build_laplacian(graph.node_count(), graph.edges); }

ScaledLaplacian build_laplacian(std::size_t node_count, const std::vector<Edge>& edges) {
    require(node_count > 0, "cannot build a Laplacian for an empty graph");
    const auto n = static_cast<Index>(node_count);
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(2 * edges.size());
    for (const auto& e : edges) {
        require(e.src < node_count && e.dst < node_count, "edge endpoint out of range");
        if (e.weight == 0.0 || e.src == e.dst) continue;
        trip.emplace_back(static_cast<Index>(e.src), static_cast<Index>(e.dst), e.weight);
        trip.emplace_back(static_cast<Index>(e.dst), static_cast<Index>(e.src), e.weight);
    }
    SparseMatrix w(n, n);
    // Duplicate (i, j) pairs only arise from an edge listed in both directions;
    // Jaccard weights agree, so keep one copy.
    w.setFromTriplets(trip.begin(), trip.end(), [](double a, double) { return a; });

    VectorXd inv_sqrt = VectorXd::Zero(n);
    for (Index k = 0; k < w.outerSize(); ++k) {
        double deg = 0.0;
        for (SparseMatrix::InnerIterator it(w, k); it; ++it) deg += it.value();
        if (deg > 0.0) inv_sqrt(k) = 1.0 / std::sqrt(deg);
    }
    std::vector<Eigen::Triplet<double>> lt;
    lt.reserve(static_cast<std::size_t>(w.nonZeros()) + node_count);
    for (Index i = 0; i < n; ++i) lt.emplace_back(i, i, 1.0);
    for (Index k = 0; k < w.outerSize(); ++k) {
        for (SparseMatrix::InnerIterator it(w, k); it; ++it) {
            lt.emplace_back(it.row(), it.col(), -it.value() * inv_sqrt(it.row()) * inv_sqrt(it.col()));
        }
    }
    ScaledLaplacian out;
    out.laplacian.resize(n, n);
    out.laplacian.setFromTriplets(lt.begin(), lt.end());
    const auto power = estimate_lambda_max(out.laplacian);
    out.lambda_max = power.value;
    out.lambda_converged = power.converged;
    SparseMatrix identity(n, n);
    identity.setIdentity();
    out.scaled = (2.0 / out.lambda_max) * out.laplacian - identity;
    return out;
}

PowerIterationResult estimate_lambda_max(const SparseMatrix& laplacian) {
    require(laplacian.rows() == laplacian.cols() && laplacian.rows() > 0, "Laplacian must be square and non-empty");
    const SparseMatrix asym = SparseMatrix(laplacian.transpose()) - laplacian;
    const double scale = std::max(1.0, laplacian.norm());
    require(asym.norm() <= 1e-12 * scale, "estimate_lambda_max requires a symmetric matrix");

    constexpr double kTol = 1e-6;
    constexpr int kMaxIter = 1000;
    const Index n = laplacian.rows();
    std::mt19937_64 rng(0x6c61706cULL);
    VectorXd v(n);
    for (Index i = 0; i < n; ++i) v(i) = 0.5 + static_cast<double>(rng() >> 11) * 0x1.0p-53;
    v.normalize();

    PowerIterationResult res;
    for (int it = 1; it <= kMaxIter; ++it) {
        VectorXd w = laplacian * v + v; // (L + I) v
        const double rayleigh = v.dot(w);
        const double residual = (w - rayleigh * v).norm();
        res.iterations = it;
        if (residual <= kTol * std::abs(rayleigh)) {
            res.value = rayleigh - 1.0;
            res.converged = true;
            return res;
        }
        v = w / w.norm();
    }
    std::cerr << "warning: lambda_max power iteration did not converge after " << kMaxIter
              << " steps; using 2.0\n";
    res.value = 2.0;
    res.converged = false;
    return res;
}

Activation activation_from_string(const std::string& s) {
    if (s == "identity") return Activation::Identity;
    if (s == "tanh") return Activation::Tanh;
    if (s == "relu") return Activation::Relu;
    throw ValidationError("unknown activation '" + s + "' (identity|tanh|relu)");
}

std::string to_string(Activation a) {
    switch (a) {
        case Activation::Identity: return "identity";
        case Activation::Tanh: return "tanh";
        case Activation::Relu: return "relu";
    }
    return "identity";
}

std::size_t FcpGnnParams::parameter_count() const {
    std::size_t n = 0;
    for_each_tensor([&](const std::string&, const auto& t) { n += static_cast<std::size_t>(t.size()); });
    return n;
}

bool FcpGnnParams::all_finite() const {
    bool ok = true;
    for_each_tensor([&](const std::string&, const auto& t) { ok = ok && t.allFinite(); });
    return ok;
}

void FcpGnnParams::set_zero() {
    for_each_tensor([](const std::string&, auto& t) { t.setZero(); });
}

FcpGnnModel make_zero_model(const ModelConfig& config) {
    require(config.features >= 1, "feature width must be >= 1");
    require(config.hidden >= 1 && config.pooled >= 1, "hidden and pooled sizes must be >= 1");
    require(config.cheb_order >= 0, "Chebyshev order must be >= 0");
    require(config.generations >= 1, "generation count must be >= 1");
    const Index f = config.features, h = config.hidden, p = config.pooled;
    FcpGnnModel m;
    m.config = config;
    for (int l = 0; l + 1 < config.generations; ++l) {
        ChebLayerParams layer;
        layer.theta.assign(static_cast<std::size_t>(config.cheb_order) + 1, MatrixXd::Zero(f, f));
        layer.bias = Eigen::RowVectorXd::Zero(f);
        m.params.cheb.push_back(std::move(layer));
    }
    for (auto* dir : {&m.params.lstm.forward, &m.params.lstm.backward}) {
        dir->w_ih = MatrixXd::Zero(4 * h, f);
        dir->w_hh = MatrixXd::Zero(4 * h, h);
        dir->bias = VectorXd::Zero(4 * h);
    }
    m.params.gap.gate_w = MatrixXd::Zero(p, 2 * h);
    m.params.gap.gate_b = VectorXd::Zero(p);
    m.params.gap.value_w = MatrixXd::Zero(p, 2 * h);
    m.params.gap.value_b = VectorXd::Zero(p);
    m.params.gap.head_w = VectorXd::Zero(p);
    m.params.gap.head_b = VectorXd::Zero(1);
    return m;
}

FcpGnnModel init_model(const ModelConfig& config, std::uint64_t seed) {
    FcpGnnModel m = make_zero_model(config);
    UniformSource rng(seed);
    const Index f = config.features, h = config.hidden, p = config.pooled;
    for (auto& layer : m.params.cheb) {
        for (auto& t : layer.theta) glorot(t, f, f, rng);
    }
    for (auto* dir : {&m.params.lstm.forward, &m.params.lstm.backward}) {
        glorot(dir->w_ih, f, 4 * h, rng);
        glorot(dir->w_hh, h, 4 * h, rng);
        dir->bias.segment(h, h).setOnes();
    }
    glorot(m.params.gap.gate_w, 2 * h, p, rng);
    glorot(m.params.gap.value_w, 2 * h, p, rng);
    MatrixXd head(p, 1);
    glorot(head, p, 1, rng);
    m.params.gap.head_w = head.col(0);
    return m;
}

MatrixXd cheb_layer_forward(const MatrixXd& x, const SparseMatrix& scaled_laplacian, const ChebLayerParams& params,
                            Activation activation) {
    check_cheb(x, scaled_laplacian, params);
    return apply_activation(cheb_combine(chebyshev_terms(x, scaled_laplacian, params.order()), params), activation);
}

Sequence build_generation_sequence(const MatrixXd& x, const SparseMatrix& scaled_laplacian,
                                   const std::vector<ChebLayerParams>& layers, Activation activation) {
    Sequence seq{x};
    for (const auto& layer : layers) {
        require(layer.in_dim() == layer.out_dim(), "generation layers must map F -> F");
        seq.push_back(cheb_layer_forward(seq.back(), scaled_laplacian, layer, activation));
    }
    return seq;
}

Sequence bilstm_forward(const Sequence& seq, const BiLstmParams& params) {
    require(!seq.empty(), "empty sequence");
    const Index h = params.hidden();
    for (const auto& s : seq) require(s.rows() == seq.front().rows() && s.cols() == seq.front().cols(), "ragged sequence");
    check_lstm_direction(params.forward, seq.front().cols(), h);
    check_lstm_direction(params.backward, seq.front().cols(), h);
    ForwardTrace::Direction fwd, bwd;
    lstm_direction_forward(seq, params.forward, false, fwd);
    lstm_direction_forward(seq, params.backward, true, bwd);
    const std::size_t steps = seq.size();
    Sequence out(steps);
    for (std::size_t t = 0; t < steps; ++t) {
        out[t].resize(seq.front().rows(), 2 * h);
        out[t].leftCols(h) = fwd.h[t];
        out[t].rightCols(h) = bwd.h[steps - 1 - t];
    }
    return out;
}

MatrixXd gated_attention_pool(const Sequence& hidden, const GapHeadParams& params) {
    require(!hidden.empty(), "empty hidden sequence");
    const Index p = params.gate_w.rows();
    require(params.gate_w.cols() == hidden.front().cols() && params.value_w.cols() == hidden.front().cols() &&
                params.value_w.rows() == p && params.gate_b.size() == p && params.value_b.size() == p,
            "pooling parameter shape mismatch");
    MatrixXd pooled = MatrixXd::Zero(hidden.front().rows(), p);
    for (const auto& ht : hidden) {
        require(ht.cols() == params.gate_w.cols(), "hidden width mismatch");
        MatrixXd a = ht * params.gate_w.transpose();
        a.rowwise() += params.gate_b.transpose();
        MatrixXd b = ht * params.value_w.transpose();
        b.rowwise() += params.value_b.transpose();
        pooled.array() += sigmoid(a).array() * b.array().tanh();
    }
    return pooled;
}

ForwardTrace model_forward_trace(const FcpGnnModel& model, const MatrixXd& x, const SparseMatrix& scaled_laplacian) {
    const auto& cfg = model.config;
    const auto& prm = model.params;
    require(x.cols() == cfg.features, "feature width " + std::to_string(x.cols()) + " does not match model width " +
                                          std::to_string(cfg.features));
    require(static_cast<int>(prm.cheb.size()) == cfg.generations - 1, "layer count does not match generation count");
    require(scaled_laplacian.rows() == x.rows(), "Laplacian size does not match node count");

    ForwardTrace tr;
    tr.generations.push_back(x);
    for (const auto& layer : prm.cheb) {
        check_cheb(tr.generations.back(), scaled_laplacian, layer);
        auto terms = chebyshev_terms(tr.generations.back(), scaled_laplacian, layer.order());
        MatrixXd pre = cheb_combine(terms, layer);
        tr.generations.push_back(apply_activation(pre, cfg.activation));
        tr.cheb_terms.push_back(std::move(terms));
        tr.cheb_pre.push_back(std::move(pre));
    }

    const Index h = prm.lstm.hidden();
    check_lstm_direction(prm.lstm.forward, x.cols(), h);
    check_lstm_direction(prm.lstm.backward, x.cols(), h);
    lstm_direction_forward(tr.generations, prm.lstm.forward, false, tr.fwd);
    lstm_direction_forward(tr.generations, prm.lstm.backward, true, tr.bwd);
    const std::size_t steps = tr.generations.size();
    for (std::size_t t = 0; t < steps; ++t) {
        MatrixXd ht(x.rows(), 2 * h);
        ht.leftCols(h) = tr.fwd.h[t];
        ht.rightCols(h) = tr.bwd.h[steps - 1 - t];
        tr.hidden.push_back(std::move(ht));
    }

    const auto& gap = prm.gap;
    require(gap.head_w.size() == gap.gate_w.rows() && gap.head_b.size() == 1, "head shape mismatch");
    tr.pooled = MatrixXd::Zero(x.rows(), gap.gate_w.rows());
    for (const auto& ht : tr.hidden) {
        require(ht.cols() == gap.gate_w.cols(), "pooling parameter shape mismatch");
        MatrixXd a = ht * gap.gate_w.transpose();
        a.rowwise() += gap.gate_b.transpose();
        MatrixXd b = ht * gap.value_w.transpose();
        b.rowwise() += gap.value_b.transpose();
        MatrixXd s = sigmoid(a);
        MatrixXd v = b.array().tanh().matrix();
        tr.pooled.array() += s.array() * v.array();
        tr.gate.push_back(std::move(s));
        tr.value.push_back(std::move(v));
    }
    VectorXd logit = tr.pooled * gap.head_w;
    logit.array() += gap.head_b(0);
    tr.probability = logit.unaryExpr([](double z) { return sigmoid(z); });
    return tr;
}

VectorXd model_forward(const FcpGnnModel& model, const MatrixXd& x, const SparseMatrix& scaled_laplacian) {
    return model_forward_trace(model, x, scaled_laplacian).probability;
}

FcpGnnParams model_backward(const FcpGnnModel& model, const SparseMatrix& scaled_laplacian, const ForwardTrace& tr,
                            const VectorXd& grad_probability) {
    const auto& prm = model.params;
    require(grad_probability.size() == tr.probability.size(), "gradient length mismatch");
    FcpGnnParams grad = make_zero_model(model.config).params;
    const Index n = tr.probability.size();
    const std::size_t steps = tr.generations.size();
    const Index h = prm.lstm.hidden();

    // Sigmoid head.
    const VectorXd dlogit = (grad_probability.array() * tr.probability.array() * (1.0 - tr.probability.array())).matrix();
    grad.gap.head_w = tr.pooled.transpose() * dlogit;
    grad.gap.head_b(0) = dlogit.sum();
    const MatrixXd dpooled = dlogit * prm.gap.head_w.transpose();

    // Gated pooling.
    Sequence dhidden(steps);
    for (std::size_t t = 0; t < steps; ++t) {
        const ArrayXXd s = tr.gate[t].array();
        const ArrayXXd v = tr.value[t].array();
        const MatrixXd da = (dpooled.array() * v * s * (1.0 - s)).matrix();
        const MatrixXd db = (dpooled.array() * s * (1.0 - v.square())).matrix();
        grad.gap.gate_w.noalias() += da.transpose() * tr.hidden[t];
        grad.gap.gate_b += da.colwise().sum().transpose();
        grad.gap.value_w.noalias() += db.transpose() * tr.hidden[t];
        grad.gap.value_b += db.colwise().sum().transpose();
        dhidden[t] = da * prm.gap.gate_w + db * prm.gap.value_w;
    }

    // BiLSTM.
    Sequence dh_fwd(steps), dh_bwd(steps);
    for (std::size_t t = 0; t < steps; ++t) {
        dh_fwd[t] = dhidden[t].leftCols(h);
        dh_bwd[t] = dhidden[t].rightCols(h);
    }
    Sequence dgen(steps, MatrixXd::Zero(n, model.config.features));
    lstm_direction_backward(tr.generations, prm.lstm.forward, false, tr.fwd, dh_fwd, grad.lstm.forward, dgen);
    lstm_direction_backward(tr.generations, prm.lstm.backward, true, tr.bwd, dh_bwd, grad.lstm.backward, dgen);

    // Chebyshev layers, last to first.
    for (std::size_t l = prm.cheb.size(); l-- > 0;) {
        const auto& layer = prm.cheb[l];
        const auto& terms = tr.cheb_terms[l];
        const MatrixXd dpre = activation_backward(dgen[l + 1], tr.cheb_pre[l], model.config.activation);
        auto& g = grad.cheb[l];
        g.bias = dpre.colwise().sum();
        std::vector<MatrixXd> dterms(terms.size());
        for (std::size_t k = 0; k < terms.size(); ++k) {
            g.theta[k] = terms[k].transpose() * dpre;
            dterms[k] = dpre * layer.theta[k].transpose();
        }
        // L~ is symmetric, so its transpose is itself.
        for (std::size_t k = terms.size() - 1; k >= 2; --k) {
            dterms[k - 1] += 2.0 * (scaled_laplacian * dterms[k]);
            dterms[k - 2] -= dterms[k];
        }
        MatrixXd dx = dterms[0];
        if (terms.size() >= 2) dx += scaled_laplacian * dterms[1];
        dgen[l] += dx;
    }
    return grad;
}

} // namespace phylo
