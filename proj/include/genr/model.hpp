#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "genr/common.hpp"
#include "genr/corpus.hpp"

namespace genr {

struct ModelDims {
    uint64_t vocab = 0;  // V, including EOS/UNK
    uint32_t embed = 32;     // d
    uint32_t context = 3;    // k: window of previous identifier tokens
    uint32_t hidden = 64;    // h

    uint32_t input_width() const { return (context + 1) * embed; }
    bool operator==(const ModelDims&) const = default;
};

// Conditional autoregressive next-token model. The query is mean-pooled,
// projected and squashed into a d-vector; each step sees that vector plus the
// embeddings of the last k identifier tokens (EOS-padded on the left) through
// one tanh hidden layer. All math is double precision with exact analytic
// gradients; the same object serves as trainable policy and frozen reference.
struct ModelParams {
    ModelDims dims;
    std::vector<double> embeddings;   // V x d
    std::vector<double> query_proj;   // d x d
    std::vector<double> hidden_w;     // input_width x h
    std::vector<double> hidden_b;     // h
    std::vector<double> out_w;        // h x V
    std::vector<double> out_b;        // V

    static ModelParams zeros(const ModelDims& dims);
    // Uniform in [-0.1, 0.1] over every block, splitmix64 stream.
    static ModelParams random(const ModelDims& dims, uint64_t seed);

    std::array<std::vector<double>*, 6> blocks();
    std::array<const std::vector<double>*, 6> blocks() const;
    static std::array<const char*, 6> block_names();

    void save(const std::string& path) const;
    static ModelParams load(const std::string& path);
    std::string serialize() const;
};

// Gradient accumulator with the same shape as the parameter blocks.
struct ModelGrad {
    ModelDims dims;
    std::vector<double> embeddings, query_proj, hidden_w, hidden_b, out_w, out_b;

    explicit ModelGrad(const ModelDims& d);
    void reset();
    std::array<std::vector<double>*, 6> blocks();
    std::array<const std::vector<double>*, 6> blocks() const;
};

// tanh(W_q . mean(E[x_t])); throws on an empty query.
std::vector<double> encode_query(const ModelParams& params, std::span<const Token> query);

// Log-probabilities over the vocabulary for the next identifier token.
std::vector<double> next_token_logprobs(const ModelParams& params,
                                        std::span<const double> query_vec,
                                        std::span<const Token> prefix);

// log p(target | query) including the terminal EOS step.
double sequence_logprob(const ModelParams& params, std::span<const Token> query,
                        std::span<const Token> target);

// Adds weight * d(log p(target | query))/d(params) into grad and returns the
// sequence log-probability.
double accumulate_sequence_gradient(const ModelParams& params, std::span<const Token> query,
                                    std::span<const Token> target, double weight,
                                    ModelGrad* grad);

// Mean negative log-likelihood over the batch plus its gradient.
double grad_nll(const ModelParams& params, std::span<const SftSample> batch, ModelGrad& grad);
double nll_loss(const ModelParams& params, std::span<const SftSample> batch);

}  // namespace genr
