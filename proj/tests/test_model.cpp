#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "genr/model.hpp"
#include "oracles.hpp"

using namespace genr;

namespace {

ModelDims tiny_dims(uint64_t vocab = 12) {
    ModelDims d;
    d.vocab = vocab;
    d.embed = 5;
    d.context = 3;
    d.hidden = 7;
    return d;
}

std::vector<SftSample> random_batch(SplitMix64& rng, uint64_t vocab, size_t n) {
    std::vector<SftSample> batch;
    for (size_t i = 0; i < n; ++i) {
        SftSample s;
        size_t ql = 1 + rng.below(4);
        for (size_t j = 0; j < ql; ++j) s.query.push_back(static_cast<Token>(1 + rng.below(vocab - 1)));
        size_t tl = 1 + rng.below(6);
        for (size_t j = 0; j < tl; ++j) s.target.push_back(static_cast<Token>(2 + rng.below(vocab - 2)));
        batch.push_back(std::move(s));
    }
    return batch;
}

}  // namespace

TEST_CASE("zero parameters give a uniform next-token distribution") {
    auto params = ModelParams::zeros(tiny_dims());
    std::vector<Token> query = {3, 4};
    auto qvec = encode_query(params, query);
    for (double v : qvec) CHECK(v == 0.0);

    auto lp = next_token_logprobs(params, qvec, std::vector<Token>{5});
    const double expect = -std::log(static_cast<double>(params.dims.vocab));
    for (double v : lp) CHECK(v == doctest::Approx(expect).epsilon(1e-12));

    // |I| = 3 target: (3+1) uniform factors
    std::vector<Token> target = {4, 5, 6};
    CHECK(sequence_logprob(params, query, target) ==
          doctest::Approx(4.0 * expect).epsilon(1e-12));
}

TEST_CASE("encode_query is permutation-invariant and rejects empty input") {
    auto params = ModelParams::random(tiny_dims(), 11);
    std::vector<Token> a = {3, 4, 7};
    std::vector<Token> b = {7, 3, 4};
    CHECK(encode_query(params, a) == encode_query(params, b));
    CHECK_THROWS_AS(encode_query(params, std::vector<Token>{}), DataError);
}

TEST_CASE("next-token log-probs normalize and shrug off bias shifts") {
    auto params = ModelParams::random(tiny_dims(), 5);
    std::vector<Token> query = {2, 9};
    auto qvec = encode_query(params, query);

    for (size_t plen = 0; plen < 4; ++plen) {
        std::vector<Token> prefix;
        for (size_t i = 0; i < plen; ++i) prefix.push_back(static_cast<Token>(2 + i));
        auto lp = next_token_logprobs(params, qvec, prefix);
        double sum = 0.0;
        for (double v : lp) sum += std::exp(v);
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }

    auto shifted = params;
    for (auto& b : shifted.out_b) b += 3.25;
    auto lp0 = next_token_logprobs(params, qvec, std::vector<Token>{4});
    auto lp1 = next_token_logprobs(shifted, qvec, std::vector<Token>{4});
    for (size_t v = 0; v < lp0.size(); ++v) CHECK(lp0[v] == doctest::Approx(lp1[v]).epsilon(1e-9));

    // saturated logits stay finite
    auto hot = params;
    for (auto& w : hot.out_b) w = 500.0;
    hot.out_b[3] = -500.0;
    auto lp2 = next_token_logprobs(hot, qvec, std::vector<Token>{});
    for (double v : lp2) CHECK(std::isfinite(v));
}

TEST_CASE("sequence_logprob sums per-token terms and never gains from length") {
    auto params = ModelParams::random(tiny_dims(), 3);
    std::vector<Token> query = {5};
    std::vector<Token> eight = {2, 3, 4, 5, 6, 7, 8, 9};
    // 8-token identifier scores 9 factors; every factor is <= 0
    double lp = sequence_logprob(params, query, eight);
    CHECK(lp < 0.0);
    for (size_t cut = 1; cut < eight.size(); ++cut) {
        std::vector<Token> shorter(eight.begin(), eight.begin() + static_cast<long>(cut));
        std::vector<Token> longer(eight.begin(), eight.begin() + static_cast<long>(cut + 1));
        // appending a token adds a log-prob (<= 0) before the EOS swap
        auto qvec = encode_query(params, query);
        double step = next_token_logprobs(params, qvec, shorter)[longer.back()];
        CHECK(step <= 0.0);
    }
}

TEST_CASE("grad_nll matches central finite differences on every block") {
    const double fd_step = 1e-5;
    const double tolerance = 1e-4;
    for (uint64_t seed = 1; seed <= 10; ++seed) {
        SplitMix64 rng(seed * 1234567);
        auto dims = tiny_dims(10 + rng.below(6));
        auto params = ModelParams::random(dims, seed);
        auto batch = random_batch(rng, dims.vocab, 3);

        ModelGrad grad(dims);
        grad_nll(params, batch, grad);

        auto blocks = params.blocks();
        auto grads = grad.blocks();
        for (size_t b = 0; b < blocks.size(); ++b) {
            auto& block = *blocks[b];
            for (int probe = 0; probe < 3; ++probe) {
                size_t idx = rng.below(block.size());
                double numeric = oracle::central_difference(
                    [&]() { return nll_loss(params, batch); }, &block[idx], fd_step);
                double analytic = (*grads[b])[idx];
                CAPTURE(seed);
                CAPTURE(ModelParams::block_names()[b]);
                CAPTURE(idx);
                REQUIRE(oracle::relative_error(analytic, numeric) < tolerance);
            }
        }
    }
}

TEST_CASE("zero-init batch loss equals the closed form") {
    auto dims = tiny_dims(17);
    auto params = ModelParams::zeros(dims);
    SplitMix64 rng(31);
    auto batch = random_batch(rng, dims.vocab, 8);
    double mean_len = 0.0;
    for (const auto& s : batch) mean_len += static_cast<double>(s.target.size() + 1);
    mean_len /= static_cast<double>(batch.size());
    ModelGrad grad(dims);
    double loss = grad_nll(params, batch, grad);
    CHECK(std::abs(loss - mean_len * std::log(static_cast<double>(dims.vocab))) < 1e-9);
}

TEST_CASE("duplicated batch leaves loss and gradient unchanged") {
    auto dims = tiny_dims();
    auto params = ModelParams::random(dims, 77);
    SplitMix64 rng(78);
    auto batch = random_batch(rng, dims.vocab, 4);
    auto doubled = batch;
    doubled.insert(doubled.end(), batch.begin(), batch.end());

    ModelGrad g1(dims), g2(dims);
    double l1 = grad_nll(params, batch, g1);
    double l2 = grad_nll(params, doubled, g2);
    CHECK(l1 == doctest::Approx(l2).epsilon(1e-12));
    auto b1 = g1.blocks();
    auto b2 = g2.blocks();
    for (size_t b = 0; b < b1.size(); ++b)
        for (size_t i = 0; i < b1[b]->size(); ++i)
            CHECK((*b1[b])[i] == doctest::Approx((*b2[b])[i]).epsilon(1e-9));
}

TEST_CASE("seeded initialization is deterministic and within bounds") {
    auto dims = tiny_dims();
    auto a = ModelParams::random(dims, 123);
    auto b = ModelParams::random(dims, 123);
    auto c = ModelParams::random(dims, 124);
    CHECK(a.serialize() == b.serialize());
    CHECK(a.serialize() != c.serialize());
    for (const auto* block : a.blocks())
        for (double v : *block) {
            CHECK(v >= -0.1);
            CHECK(v <= 0.1);
        }
}

TEST_CASE("snapshot round-trip is bit-exact and checksum-guarded") {
    namespace fs = std::filesystem;
    auto dir = fs::temp_directory_path() / "genr_model_test";
    fs::create_directories(dir);
    auto params = ModelParams::random(tiny_dims(), 2718);
    std::string p1 = (dir / "m1.bin").string();
    std::string p2 = (dir / "m2.bin").string();
    params.save(p1);
    auto loaded = ModelParams::load(p1);
    loaded.save(p2);
    CHECK(read_file_bytes(p1) == read_file_bytes(p2));

    std::vector<Token> query = {3};
    std::vector<Token> target = {4, 5};
    CHECK(sequence_logprob(params, query, target) == sequence_logprob(loaded, query, target));

    // flip one payload byte -> checksum error
    std::string bytes = read_file_bytes(p1);
    bytes[bytes.size() / 2] ^= 0x40;
    std::string corrupt = (dir / "m_corrupt.bin").string();
    write_file_bytes(corrupt, bytes);
    CHECK_THROWS_WITH_AS(ModelParams::load(corrupt), doctest::Contains("checksum"), DataError);

    // truncated file
    std::string trunc = (dir / "m_trunc.bin").string();
    write_file_bytes(trunc, read_file_bytes(p1).substr(0, 64));
    CHECK_THROWS_AS(ModelParams::load(trunc), DataError);
}
