#include "genr/aligner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <set>

#include <json.hpp>

namespace genr {
namespace {

// -log sigmoid(z), computed without overflow on either tail.
double neg_log_sigmoid(double z) {
    if (z >= 0.0) return std::log1p(std::exp(-z));
    return -z + std::log1p(std::exp(z));
}

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

template <typename T>
void seeded_shuffle(std::vector<T>& v, SplitMix64& rng) {
    for (size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

}  // namespace

void TrainConfig::validate() const {
    if (sft_lr <= 0.0 || dpo_lr <= 0.0) throw UsageError("learning rates must be positive");
    if (beta <= 0.0) throw UsageError("dpo beta must be positive");
    if (batch_size == 0) throw UsageError("batch size must be positive");
}

Adam::Adam(const ModelDims& dims, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(dims), v_(dims) {}

void Adam::step(ModelParams& params, const ModelGrad& grad) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    auto pb = params.blocks();
    auto gb = grad.blocks();
    auto mb = m_.blocks();
    auto vb = v_.blocks();
    for (size_t b = 0; b < pb.size(); ++b) {
        auto& p = *pb[b];
        const auto& g = *gb[b];
        auto& m = *mb[b];
        auto& v = *vb[b];
        for (size_t i = 0; i < p.size(); ++i) {
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
            double mhat = m[i] / bc1;
            double vhat = v[i] / bc2;
            p[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

TrainLog train_sft(ModelParams& model, std::span<const SftSample> samples,
                   const TrainConfig& config, std::ostream* log) {
    config.validate();
    if (samples.empty()) throw DataError("no SFT samples to train on");
    TrainLog result;
    Adam opt(model.dims, config.sft_lr);
    ModelGrad grad(model.dims);
    std::vector<size_t> order(samples.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    SplitMix64 rng(config.seed);

    std::vector<SftSample> batch;
    for (uint32_t epoch = 0; epoch < config.epochs; ++epoch) {
        double full = nll_loss(model, samples);
        result.epoch_loss.push_back(full);
        if (log) *log << epoch << ",0," << full << "\n";
        seeded_shuffle(order, rng);
        size_t step = 1;
        for (size_t start = 0; start < order.size(); start += config.batch_size) {
            batch.clear();
            for (size_t i = start; i < std::min(order.size(), start + config.batch_size); ++i)
                batch.push_back(samples[order[i]]);
            grad.reset();
            double loss = grad_nll(model, batch, grad);
            opt.step(model, grad);
            if (log) *log << epoch << "," << step << "," << loss << "\n";
            ++step;
        }
    }
    double final_loss = nll_loss(model, samples);
    result.epoch_loss.push_back(final_loss);
    if (log) *log << config.epochs << ",0," << final_loss << "\n";
    return result;
}

std::vector<PreferencePair> build_preferences(std::span<const ClickEvent> clicks,
                                              const Catalog& catalog, uint64_t seed,
                                              uint32_t ratio) {
    struct QueryState {
        std::set<ItemId> clicked;
        std::set<ItemId> exposed;
    };
    std::map<std::string, QueryState> by_query;
    for (const auto& ev : clicks) {
        auto& st = by_query[ev.query];
        if (ev.label == ClickLabel::clicked)
            st.clicked.insert(ev.item_id);
        else
            st.exposed.insert(ev.item_id);
    }

    SplitMix64 rng(seed);
    std::vector<PreferencePair> pairs;
    for (auto& [query, st] : by_query) {
        if (st.clicked.empty()) continue;
        // An item both clicked and exposed for the same query counts as clicked.
        std::vector<ItemId> exposed;
        for (ItemId id : st.exposed)
            if (!st.clicked.count(id)) exposed.push_back(id);

        auto query_ids = catalog.vocab.encode_query(tokenize(query));
        if (query_ids.empty()) continue;

        auto emit = [&](const ItemRecord& clicked_item, const std::vector<Token>& rejected,
                        PairSource source) {
            const auto& spans = clicked_item.spans;
            for (int attempt = 0; attempt < 4; ++attempt) {
                const auto& chosen = spans[rng.below(spans.size())].tokens;
                if (chosen != rejected) {
                    PreferencePair p;
                    p.query = query_ids;
                    p.query_text = query;
                    p.chosen = chosen;
                    p.rejected = rejected;
                    p.source = source;
                    pairs.push_back(std::move(p));
                    return;
                }
            }
        };

        for (ItemId clicked_id : st.clicked) {
            const auto& clicked_item = catalog.item(clicked_id);
            const size_t budget = clicked_item.spans.size() * ratio;
            for (size_t i = 0; i < budget; ++i) {
                if (!exposed.empty()) {
                    const auto& neg = catalog.item(exposed[rng.below(exposed.size())]);
                    emit(clicked_item, neg.spans[rng.below(neg.spans.size())].tokens,
                         PairSource::exposed_vs_clicked);
                }
                for (int attempt = 0; attempt < 8; ++attempt) {
                    const auto& neg = catalog.items[rng.below(catalog.items.size())];
                    if (st.clicked.count(neg.item_id)) continue;
                    emit(clicked_item, neg.spans[rng.below(neg.spans.size())].tokens,
                         PairSource::random_vs_clicked);
                    break;
                }
            }
        }
    }
    return pairs;
}

double dpo_loss_and_grad(const ModelParams& policy, const ModelParams& reference,
                         std::span<const PreferencePair> batch, double beta, ModelGrad& grad) {
    if (batch.empty()) throw DataError("empty preference batch");
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    for (const auto& pair : batch) {
        double pol_w = sequence_logprob(policy, pair.query, pair.chosen);
        double pol_l = sequence_logprob(policy, pair.query, pair.rejected);
        double ref_w = sequence_logprob(reference, pair.query, pair.chosen);
        double ref_l = sequence_logprob(reference, pair.query, pair.rejected);
        double z = beta * ((pol_w - ref_w) - (pol_l - ref_l));
        loss += neg_log_sigmoid(z) * inv_b;
        double dz = (sigmoid(z) - 1.0) * beta * inv_b;  // d loss / d pol_w
        accumulate_sequence_gradient(policy, pair.query, pair.chosen, dz, &grad);
        accumulate_sequence_gradient(policy, pair.query, pair.rejected, -dz, &grad);
    }
    return loss;
}

double dpo_loss(const ModelParams& policy, const ModelParams& reference,
                std::span<const PreferencePair> batch, double beta) {
    if (batch.empty()) throw DataError("empty preference batch");
    double loss = 0.0;
    for (const auto& pair : batch) {
        double z = beta * ((sequence_logprob(policy, pair.query, pair.chosen) -
                            sequence_logprob(reference, pair.query, pair.chosen)) -
                           (sequence_logprob(policy, pair.query, pair.rejected) -
                            sequence_logprob(reference, pair.query, pair.rejected)));
        loss += neg_log_sigmoid(z);
    }
    return loss / static_cast<double>(batch.size());
}

double preference_accuracy(const ModelParams& policy, std::span<const PreferencePair> pairs) {
    if (pairs.empty()) throw DataError("no preference pairs to score");
    size_t hits = 0;
    for (const auto& pair : pairs)
        if (sequence_logprob(policy, pair.query, pair.chosen) >
            sequence_logprob(policy, pair.query, pair.rejected))
            ++hits;
    return static_cast<double>(hits) / static_cast<double>(pairs.size());
}

TrainLog train_dpo(ModelParams& model, std::span<const PreferencePair> pairs,
                   const TrainConfig& config, std::ostream* log) {
    config.validate();
    if (pairs.empty()) throw DataError("no preference pairs to train on");
    const ModelParams reference = model;  // frozen
    TrainLog result;
    Adam opt(model.dims, config.dpo_lr);
    ModelGrad grad(model.dims);
    std::vector<size_t> order(pairs.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    SplitMix64 rng(config.seed);

    std::vector<PreferencePair> batch;
    for (uint32_t epoch = 0; epoch < config.epochs; ++epoch) {
        double full = dpo_loss(model, reference, pairs, config.beta);
        result.epoch_loss.push_back(full);
        if (log) *log << epoch << ",0," << full << "\n";
        seeded_shuffle(order, rng);
        size_t step = 1;
        for (size_t start = 0; start < order.size(); start += config.batch_size) {
            batch.clear();
            for (size_t i = start; i < std::min(order.size(), start + config.batch_size); ++i)
                batch.push_back(pairs[order[i]]);
            grad.reset();
            double loss = dpo_loss_and_grad(model, reference, batch, config.beta, grad);
            opt.step(model, grad);
            if (log) *log << epoch << "," << step << "," << loss << "\n";
            ++step;
        }
    }
    double final_loss = dpo_loss(model, reference, pairs, config.beta);
    result.epoch_loss.push_back(final_loss);
    if (log) *log << config.epochs << ",0," << final_loss << "\n";
    return result;
}

void write_preferences(const std::string& path, std::span<const PreferencePair> pairs,
                       const Vocabulary& vocab) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot open preferences file for writing: " + path);
    for (const auto& pair : pairs) {
        nlohmann::json row;
        row["query"] = pair.query_text;
        auto tokens_of = [&](const std::vector<Token>& ids) {
            nlohmann::json arr = nlohmann::json::array();
            for (Token t : ids) arr.push_back(vocab.token(t));
            return arr;
        };
        row["chosen"] = tokens_of(pair.chosen);
        row["rejected"] = tokens_of(pair.rejected);
        row["source"] =
            pair.source == PairSource::exposed_vs_clicked ? "exposed_vs_clicked" : "random_vs_clicked";
        out << row.dump() << "\n";
    }
    if (!out) throw DataError("short write: " + path);
}

std::vector<PreferencePair> load_preferences(const std::string& path, const Vocabulary& vocab) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open preferences file: " + path);
    std::vector<PreferencePair> pairs;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json row;
        try {
            row = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DataError("preferences line " + std::to_string(lineno) + ": " + e.what());
        }
        PreferencePair p;
        p.query_text = row.at("query").get<std::string>();
        p.query = vocab.encode_query(tokenize(p.query_text));
        for (const auto& t : row.at("chosen")) p.chosen.push_back(vocab.id_or_unk(t.get<std::string>()));
        for (const auto& t : row.at("rejected"))
            p.rejected.push_back(vocab.id_or_unk(t.get<std::string>()));
        std::string src = row.at("source").get<std::string>();
        if (src == "exposed_vs_clicked")
            p.source = PairSource::exposed_vs_clicked;
        else if (src == "random_vs_clicked")
            p.source = PairSource::random_vs_clicked;
        else
            throw DataError("preferences line " + std::to_string(lineno) + ": unknown source " + src);
        pairs.push_back(std::move(p));
    }
    return pairs;
}

}  // namespace genr
