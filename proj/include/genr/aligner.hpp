#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "genr/corpus.hpp"
#include "genr/model.hpp"

namespace genr {

enum class PairSource { exposed_vs_clicked, random_vs_clicked };

struct PreferencePair {
    std::vector<Token> query;
    std::string query_text;
    std::vector<Token> chosen;    // span of an item clicked for the query
    std::vector<Token> rejected;  // span of an exposed-not-clicked or random item
    PairSource source = PairSource::random_vs_clicked;
};

struct TrainConfig {
    double sft_lr = 5e-5;
    double dpo_lr = 6e-5;
    double beta = 0.1;  // deviation strength from the frozen reference
    uint32_t batch_size = 32;
    uint32_t epochs = 1;
    uint64_t seed = 1;

    void validate() const;
};

// Adam with bias correction; one optimizer instance per training run.
class Adam {
  public:
    Adam(const ModelDims& dims, double lr, double beta1 = 0.9, double beta2 = 0.999,
         double eps = 1e-8);
    void step(ModelParams& params, const ModelGrad& grad);

  private:
    double lr_, beta1_, beta2_, eps_;
    int64_t t_ = 0;
    ModelGrad m_, v_;
};

struct TrainLog {
    // epoch_loss[e] is the full-dataset loss after e epochs (index 0 is the
    // untrained model), so descent is visible without batch noise.
    std::vector<double> epoch_loss;
};

// Supervised fine-tuning over expanded (query, span) samples. Writes CSV
// rows "epoch,step,loss" when a log stream is given; step 0 carries the
// full-dataset loss measured before that epoch's updates.
TrainLog train_sft(ModelParams& model, std::span<const SftSample> samples,
                   const TrainConfig& config, std::ostream* log = nullptr);

// Builds preference pairs from click logs: for each query with at least one
// click, every clicked item's spans are paired against exposed-not-clicked
// items of the same query and against random catalog negatives, `ratio`
// pairs of each kind per clicked span. The chosen span is drawn uniformly
// from the clicked item's spans per pair.
std::vector<PreferencePair> build_preferences(std::span<const ClickEvent> clicks,
                                              const Catalog& catalog, uint64_t seed,
                                              uint32_t ratio = 1);

// DPO objective: mean of -log sigmoid(beta * ((log pi - log ref)(chosen) -
// (log pi - log ref)(rejected))). The reference never receives gradient.
double dpo_loss_and_grad(const ModelParams& policy, const ModelParams& reference,
                         std::span<const PreferencePair> batch, double beta, ModelGrad& grad);
double dpo_loss(const ModelParams& policy, const ModelParams& reference,
                std::span<const PreferencePair> batch, double beta);

// Fraction of pairs where the policy scores the chosen span higher.
double preference_accuracy(const ModelParams& policy, std::span<const PreferencePair> pairs);

// Preference alignment against a frozen copy of the input model.
TrainLog train_dpo(ModelParams& model, std::span<const PreferencePair> pairs,
                   const TrainConfig& config, std::ostream* log = nullptr);

void write_preferences(const std::string& path, std::span<const PreferencePair> pairs,
                       const Vocabulary& vocab);
std::vector<PreferencePair> load_preferences(const std::string& path, const Vocabulary& vocab);

}  // namespace genr
