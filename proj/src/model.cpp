#include "genr/model.hpp"

#include <cmath>
#include <cstring>

namespace genr {
namespace {

constexpr char kMagic[4] = {'G', 'P', 'M', '1'};
constexpr uint32_t kVersion = 1;

size_t block_len(const ModelDims& d, size_t i) {
    switch (i) {
        case 0: return d.vocab * d.embed;
        case 1: return static_cast<size_t>(d.embed) * d.embed;
        case 2: return static_cast<size_t>(d.input_width()) * d.hidden;
        case 3: return d.hidden;
        case 4: return static_cast<size_t>(d.hidden) * d.vocab;
        case 5: return d.vocab;
        default: throw InternalError("bad block index");
    }
}

// Shared forward state for one step; kept flat to avoid allocation churn.
struct StepScratch {
    std::vector<double> input;    // (k+1) x d
    std::vector<double> hidden;   // h
    std::vector<double> logprob;  // V
    std::vector<Token> context;   // k
};

void forward_step(const ModelParams& p, std::span<const double> query_vec,
                  std::span<const Token> prefix, StepScratch& s) {
    const auto& d = p.dims;
    const size_t dim = d.embed, h = d.hidden, V = d.vocab, k = d.context;
    s.input.resize(d.input_width());
    s.hidden.assign(h, 0.0);
    s.logprob.resize(V);
    s.context.resize(k);
    for (size_t i = 0; i < k; ++i) {
        size_t need = k - i;
        s.context[i] = prefix.size() >= need ? prefix[prefix.size() - need] : Vocabulary::kEos;
    }
    std::copy(query_vec.begin(), query_vec.end(), s.input.begin());
    for (size_t i = 0; i < k; ++i)
        std::copy_n(p.embeddings.begin() + static_cast<long>(s.context[i] * dim), dim,
                    s.input.begin() + static_cast<long>((i + 1) * dim));

    const size_t in_w = d.input_width();
    for (size_t r = 0; r < in_w; ++r) {
        double x = s.input[r];
        if (x == 0.0) continue;
        const double* row = p.hidden_w.data() + r * h;
        for (size_t c = 0; c < h; ++c) s.hidden[c] += x * row[c];
    }
    for (size_t c = 0; c < h; ++c) s.hidden[c] = std::tanh(s.hidden[c] + p.hidden_b[c]);

    std::copy(p.out_b.begin(), p.out_b.end(), s.logprob.begin());
    for (size_t c = 0; c < h; ++c) {
        double g = s.hidden[c];
        if (g == 0.0) continue;
        const double* row = p.out_w.data() + c * V;
        for (size_t v = 0; v < V; ++v) s.logprob[v] += g * row[v];
    }
    double mx = s.logprob[0];
    for (size_t v = 1; v < V; ++v) mx = std::max(mx, s.logprob[v]);
    double sum = 0.0;
    for (size_t v = 0; v < V; ++v) sum += std::exp(s.logprob[v] - mx);
    double lse = mx + std::log(sum);
    for (size_t v = 0; v < V; ++v) s.logprob[v] -= lse;
}

}  // namespace

ModelParams ModelParams::zeros(const ModelDims& dims) {
    ModelParams p;
    p.dims = dims;
    p.embeddings.assign(block_len(dims, 0), 0.0);
    p.query_proj.assign(block_len(dims, 1), 0.0);
    p.hidden_w.assign(block_len(dims, 2), 0.0);
    p.hidden_b.assign(block_len(dims, 3), 0.0);
    p.out_w.assign(block_len(dims, 4), 0.0);
    p.out_b.assign(block_len(dims, 5), 0.0);
    return p;
}

ModelParams ModelParams::random(const ModelDims& dims, uint64_t seed) {
    ModelParams p = zeros(dims);
    SplitMix64 rng(seed);
    for (auto* block : p.blocks())
        for (auto& w : *block) w = rng.uniform(-0.1, 0.1);
    return p;
}

std::array<std::vector<double>*, 6> ModelParams::blocks() {
    return {&embeddings, &query_proj, &hidden_w, &hidden_b, &out_w, &out_b};
}

std::array<const std::vector<double>*, 6> ModelParams::blocks() const {
    return {&embeddings, &query_proj, &hidden_w, &hidden_b, &out_w, &out_b};
}

std::array<const char*, 6> ModelParams::block_names() {
    return {"embeddings", "query_proj", "hidden_w", "hidden_b", "out_w", "out_b"};
}

ModelGrad::ModelGrad(const ModelDims& d) : dims(d) {
    embeddings.assign(block_len(d, 0), 0.0);
    query_proj.assign(block_len(d, 1), 0.0);
    hidden_w.assign(block_len(d, 2), 0.0);
    hidden_b.assign(block_len(d, 3), 0.0);
    out_w.assign(block_len(d, 4), 0.0);
    out_b.assign(block_len(d, 5), 0.0);
}

void ModelGrad::reset() {
    for (auto* block : blocks()) std::fill(block->begin(), block->end(), 0.0);
}

std::array<std::vector<double>*, 6> ModelGrad::blocks() {
    return {&embeddings, &query_proj, &hidden_w, &hidden_b, &out_w, &out_b};
}

std::array<const std::vector<double>*, 6> ModelGrad::blocks() const {
    return {&embeddings, &query_proj, &hidden_w, &hidden_b, &out_w, &out_b};
}

std::vector<double> encode_query(const ModelParams& params, std::span<const Token> query) {
    if (query.empty()) throw DataError("cannot encode an empty query");
    const auto& d = params.dims;
    const size_t dim = d.embed;
    std::vector<double> mean(dim, 0.0);
    for (Token t : query) {
        if (t >= d.vocab) throw InternalError("query token id out of range");
        const double* e = params.embeddings.data() + static_cast<size_t>(t) * dim;
        for (size_t i = 0; i < dim; ++i) mean[i] += e[i];
    }
    const double inv = 1.0 / static_cast<double>(query.size());
    for (auto& v : mean) v *= inv;
    std::vector<double> out(dim, 0.0);
    for (size_t i = 0; i < dim; ++i) {
        double acc = 0.0;
        const double* row = params.query_proj.data() + i * dim;
        for (size_t j = 0; j < dim; ++j) acc += row[j] * mean[j];
        out[i] = std::tanh(acc);
    }
    return out;
}

std::vector<double> next_token_logprobs(const ModelParams& params,
                                        std::span<const double> query_vec,
                                        std::span<const Token> prefix) {
    StepScratch s;
    forward_step(params, query_vec, prefix, s);
    return s.logprob;
}

double sequence_logprob(const ModelParams& params, std::span<const Token> query,
                        std::span<const Token> target) {
    return accumulate_sequence_gradient(params, query, target, 0.0, nullptr);
}

double accumulate_sequence_gradient(const ModelParams& params, std::span<const Token> query,
                                    std::span<const Token> target, double weight,
                                    ModelGrad* grad) {
    if (target.empty()) throw InternalError("target identifier must be non-empty");
    const auto& d = params.dims;
    const size_t dim = d.embed, h = d.hidden, V = d.vocab, k = d.context;

    // Query encoding, with intermediates kept for the backward pass.
    if (query.empty()) throw DataError("cannot encode an empty query");
    std::vector<double> mean(dim, 0.0);
    for (Token t : query) {
        const double* e = params.embeddings.data() + static_cast<size_t>(t) * dim;
        for (size_t i = 0; i < dim; ++i) mean[i] += e[i];
    }
    const double inv_q = 1.0 / static_cast<double>(query.size());
    for (auto& v : mean) v *= inv_q;
    std::vector<double> qvec(dim);
    for (size_t i = 0; i < dim; ++i) {
        double acc = 0.0;
        const double* row = params.query_proj.data() + i * dim;
        for (size_t j = 0; j < dim; ++j) acc += row[j] * mean[j];
        qvec[i] = std::tanh(acc);
    }

    const size_t steps = target.size() + 1;  // terminal EOS step
    double total = 0.0;
    StepScratch s;
    std::vector<double> dq(dim, 0.0);
    std::vector<double> dhid(h), dz(h), dinput(d.input_width());
    std::vector<double> dlogits(V);

    for (size_t j = 0; j < steps; ++j) {
        auto prefix = target.subspan(0, j < target.size() ? j : target.size());
        Token y = j < target.size() ? target[j] : Vocabulary::kEos;
        if (y >= V) throw InternalError("target token id out of range");
        forward_step(params, qvec, prefix, s);
        total += s.logprob[y];
        if (grad == nullptr || weight == 0.0) continue;

        // d(w * logp[y]) / dlogits = w * (onehot - softmax)
        for (size_t v = 0; v < V; ++v) dlogits[v] = -weight * std::exp(s.logprob[v]);
        dlogits[y] += weight;

        for (size_t c = 0; c < h; ++c) {
            double g = s.hidden[c];
            double acc = 0.0;
            double* grow = grad->out_w.data() + c * V;
            const double* row = params.out_w.data() + c * V;
            for (size_t v = 0; v < V; ++v) {
                grow[v] += g * dlogits[v];
                acc += row[v] * dlogits[v];
            }
            dhid[c] = acc;
        }
        for (size_t v = 0; v < V; ++v) grad->out_b[v] += dlogits[v];

        for (size_t c = 0; c < h; ++c) dz[c] = dhid[c] * (1.0 - s.hidden[c] * s.hidden[c]);

        const size_t in_w = d.input_width();
        for (size_t r = 0; r < in_w; ++r) {
            double x = s.input[r];
            const double* row = params.hidden_w.data() + r * h;
            double* grow = grad->hidden_w.data() + r * h;
            double acc = 0.0;
            for (size_t c = 0; c < h; ++c) {
                grow[c] += x * dz[c];
                acc += row[c] * dz[c];
            }
            dinput[r] = acc;
        }
        for (size_t c = 0; c < h; ++c) grad->hidden_b[c] += dz[c];

        for (size_t i = 0; i < dim; ++i) dq[i] += dinput[i];
        for (size_t slot = 0; slot < k; ++slot) {
            double* ge = grad->embeddings.data() + static_cast<size_t>(s.context[slot]) * dim;
            const double* src = dinput.data() + (slot + 1) * dim;
            for (size_t i = 0; i < dim; ++i) ge[i] += src[i];
        }
    }

    if (grad != nullptr && weight != 0.0) {
        // back through q = tanh(W_q . mean)
        std::vector<double> da(dim);
        for (size_t i = 0; i < dim; ++i) da[i] = dq[i] * (1.0 - qvec[i] * qvec[i]);
        std::vector<double> dmean(dim, 0.0);
        for (size_t i = 0; i < dim; ++i) {
            double* grow = grad->query_proj.data() + i * dim;
            const double* row = params.query_proj.data() + i * dim;
            for (size_t j2 = 0; j2 < dim; ++j2) {
                grow[j2] += da[i] * mean[j2];
                dmean[j2] += row[j2] * da[i];
            }
        }
        for (Token t : query) {
            double* ge = grad->embeddings.data() + static_cast<size_t>(t) * dim;
            for (size_t i = 0; i < dim; ++i) ge[i] += dmean[i] * inv_q;
        }
    }
    return total;
}

double grad_nll(const ModelParams& params, std::span<const SftSample> batch, ModelGrad& grad) {
    if (batch.empty()) throw DataError("empty training batch");
    const double w = -1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    for (const auto& sample : batch)
        loss += accumulate_sequence_gradient(params, sample.query, sample.target, w, &grad);
    return -loss / static_cast<double>(batch.size());
}

double nll_loss(const ModelParams& params, std::span<const SftSample> batch) {
    if (batch.empty()) throw DataError("empty training batch");
    double loss = 0.0;
    for (const auto& sample : batch) loss += sequence_logprob(params, sample.query, sample.target);
    return -loss / static_cast<double>(batch.size());
}

std::string ModelParams::serialize() const {
    std::string out;
    out.append(kMagic, 4);
    put_u32(out, kVersion);
    put_u64(out, dims.vocab);
    put_u32(out, dims.embed);
    put_u32(out, dims.context);
    put_u32(out, dims.hidden);
    for (const auto* block : blocks())
        for (double v : *block) put_f64(out, v);
    put_u64(out, fnv1a64(out.data(), out.size()));
    return out;
}

void ModelParams::save(const std::string& path) const { write_file_bytes(path, serialize()); }

ModelParams ModelParams::load(const std::string& path) {
    std::string bytes = read_file_bytes(path);
    if (bytes.size() < 8 + 4 + 4 + 8 + 12)
        throw DataError("model snapshot truncated: " + path);
    uint64_t stored_le = 0;
    for (int i = 0; i < 8; ++i)
        stored_le |= static_cast<uint64_t>(static_cast<unsigned char>(bytes[bytes.size() - 8 + i]))
                     << (8 * i);
    if (fnv1a64(bytes.data(), bytes.size() - 8) != stored_le)
        throw DataError("model snapshot checksum mismatch: " + path);

    ByteReader in(std::move(bytes));
    char magic[4];
    in.raw(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) throw DataError("not a model snapshot: " + path);
    uint32_t version = in.u32();
    if (version != kVersion)
        throw DataError("unsupported model snapshot version " + std::to_string(version));
    ModelDims dims;
    dims.vocab = in.u64();
    dims.embed = in.u32();
    dims.context = in.u32();
    dims.hidden = in.u32();
    ModelParams p = ModelParams::zeros(dims);
    for (auto* block : p.blocks())
        for (auto& v : *block) v = in.f64();
    if (in.remaining() != 8) throw DataError("model snapshot has unexpected size: " + path);
    return p;
}

}  // namespace genr
