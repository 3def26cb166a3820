#pragma once
// FCP-GNN forward/backward computation.
//
// Pipeline per node: PCA features x(1) -> Cheb_1 -> x(2) -> Cheb_2 -> x(3);
// the G vectors form a sequence fed to a bidirectional LSTM; a gated
// attention sum over the sequence axis yields a pooled vector; a sigmoid
// unit turns it into Pr(dominant).
//
// Sequences are stored time-major: std::vector over timesteps of N x width
// matrices, one row per node.
#include "phylo/phylo_graph.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <cstdint>
#include <string>
#include <vector>

namespace phylo {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Sequence = std::vector<Eigen::MatrixXd>;

struct ScaledLaplacian {
    SparseMatrix laplacian; // L = I - D^-1/2 W D^-1/2
    double lambda_max = 2.0;
    bool lambda_converged = true;
    SparseMatrix scaled;    // (2 / lambda_max) L - I

    std::size_t size() const { return static_cast<std::size_t>(laplacian.rows()); }
};

// Symmetrizes the directed edges, zero-degree nodes get d^-1/2 = 0.
ScaledLaplacian build_laplacian(const PhyloGraph& graph);
ScaledLaplacian build_laplacian(std::size_t node_count, const std::vector<Edge>& edges);

struct PowerIterationResult {
    double value = 2.0;
    bool converged = false;
    int iterations = 0;
};

// Largest eigenvalue of a symmetric L by power iteration on L + I: fixed-seed
// start, residual tolerance 1e-6 relative, at most 1000 steps. Falls back to
// 2.0 when it does not converge (logged on stderr).
PowerIterationResult estimate_lambda_max(const SparseMatrix& laplacian);

enum class Activation { Identity, Tanh, Relu };
Activation activation_from_string(const std::string& s);
std::string to_string(Activation a);

struct ChebLayerParams {
    std::vector<Eigen::MatrixXd> theta; // order+1 matrices, F_in x F_out
    Eigen::RowVectorXd bias;            // F_out

    int order() const { return static_cast<int>(theta.size()) - 1; }
    Eigen::Index in_dim() const { return theta.front().rows(); }
    Eigen::Index out_dim() const { return theta.front().cols(); }
};

// Gate blocks are stacked in the order input, forget, cell, output.
struct LstmDirectionParams {
    Eigen::MatrixXd w_ih; // 4H x F
    Eigen::MatrixXd w_hh; // 4H x H
    Eigen::VectorXd bias; // 4H
};

struct BiLstmParams {
    LstmDirectionParams forward;
    LstmDirectionParams backward;
    Eigen::Index hidden() const { return forward.w_hh.cols(); }
};

struct GapHeadParams {
    Eigen::MatrixXd gate_w;  // P x 2H
    Eigen::VectorXd gate_b;  // P
    Eigen::MatrixXd value_w; // P x 2H
    Eigen::VectorXd value_b; // P
    Eigen::VectorXd head_w;  // P
    Eigen::VectorXd head_b;  // 1
};

struct ModelConfig {
    int features = 0;    // F
    int hidden = 32;     // H
    int pooled = 32;     // P
    int cheb_order = 2;  // K
    int generations = 3; // G, uses G-1 Chebyshev layers
    Activation activation = Activation::Identity;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct FcpGnnParams {
    std::vector<ChebLayerParams> cheb;
    BiLstmParams lstm;
    GapHeadParams gap;

    // Visits every tensor as (name, Eigen object&) in a fixed order.
    template <class Self, class F>
    static void visit(Self& self, F&& f) {
        for (std::size_t l = 0; l < self.cheb.size(); ++l) {
            const std::string p = "cheb" + std::to_string(l + 1);
            for (std::size_t k = 0; k < self.cheb[l].theta.size(); ++k) {
                f(p + ".theta" + std::to_string(k), self.cheb[l].theta[k]);
            }
            f(p + ".bias", self.cheb[l].bias);
        }
        f(std::string("lstm.forward.w_ih"), self.lstm.forward.w_ih);
        f(std::string("lstm.forward.w_hh"), self.lstm.forward.w_hh);
        f(std::string("lstm.forward.bias"), self.lstm.forward.bias);
        f(std::string("lstm.backward.w_ih"), self.lstm.backward.w_ih);
        f(std::string("lstm.backward.w_hh"), self.lstm.backward.w_hh);
        f(std::string("lstm.backward.bias"), self.lstm.backward.bias);
        f(std::string("gap.gate_w"), self.gap.gate_w);
        f(std::string("gap.gate_b"), self.gap.gate_b);
        f(std::string("gap.value_w"), self.gap.value_w);
        f(std::string("gap.value_b"), self.gap.value_b);
        f(std::string("head.w"), self.gap.head_w);
        f(std::string("head.b"), self.gap.head_b);
    }
    template <class F> void for_each_tensor(F&& f) { visit(*this, f); }
    template <class F> void for_each_tensor(F&& f) const { visit(*this, f); }

    std::size_t parameter_count() const;
    bool all_finite() const;
    void set_zero();
};

struct FcpGnnModel {
    ModelConfig config;
    FcpGnnParams params;
};

// Zero-valued parameters with the shapes implied by config.
FcpGnnModel make_zero_model(const ModelConfig& config);

// Glorot-uniform weights, zero biases, LSTM forget-gate bias 1. Deterministic in seed.
FcpGnnModel init_model(const ModelConfig& config, std::uint64_t seed);

Eigen::MatrixXd cheb_layer_forward(const Eigen::MatrixXd& x, const SparseMatrix& scaled_laplacian,
                                   const ChebLayerParams& params,
                                   Activation activation = Activation::Identity);

Sequence build_generation_sequence(const Eigen::MatrixXd& x, const SparseMatrix& scaled_laplacian,
                                   const std::vector<ChebLayerParams>& layers,
                                   Activation activation = Activation::Identity);

// Per timestep N x 2H (forward hidden || backward hidden).
Sequence bilstm_forward(const Sequence& seq, const BiLstmParams& params);

// Sum over timesteps of sigmoid(gate) * tanh(value); N x P.
Eigen::MatrixXd gated_attention_pool(const Sequence& hidden, const GapHeadParams& params);

Eigen::VectorXd model_forward(const FcpGnnModel& model, const Eigen::MatrixXd& x,
                              const SparseMatrix& scaled_laplacian);

// Intermediate values kept for the backward pass.
struct ForwardTrace {
    Sequence generations;                      // G x (N x F)
    std::vector<std::vector<Eigen::MatrixXd>> cheb_terms; // per layer, T_k(L~) X
    std::vector<Eigen::MatrixXd> cheb_pre;     // per layer, before activation
    struct Direction {
        Sequence i, f, g, o, c, tanh_c, h;      // in processing order
    };
    Direction fwd, bwd;
    Sequence hidden;                           // G x (N x 2H), chronological
    Sequence gate, value;                      // G x (N x P)
    Eigen::MatrixXd pooled;                    // N x P
    Eigen::VectorXd probability;               // N
};

ForwardTrace model_forward_trace(const FcpGnnModel& model, const Eigen::MatrixXd& x,
                                 const SparseMatrix& scaled_laplacian);

// Reverse-mode pass: gradient of a scalar loss with respect to every
// parameter, given dLoss/dProbability per node.
FcpGnnParams model_backward(const FcpGnnModel& model, const SparseMatrix& scaled_laplacian,
                            const ForwardTrace& trace, const Eigen::VectorXd& grad_probability);

} // namespace phylo
