#pragma once
// Plain sequential fine-tuning written directly against the head, loss and
// optimizer primitives: no memory bank, no adapter, no replay.
#include <vector>

#include "asal/head.hpp"
#include "asal/losses.hpp"
#include "asal/runner.hpp"

namespace reference {

struct StepLosses {
  double combined = 0.0;
  double correlation = 0.0;
};

inline std::vector<StepLosses> sequential_finetune(const asal::RunConfig& config, const asal::Dataset& data) {
  using namespace asal;
  Head head = init_model(config, data.dim).head;
  Rng rng = make_training_rng(config.seed);
  auto opt = AdamState<double>::init(head.net.parameter_count(), config.optimizer);
  std::vector<StepLosses> trace;

  for (const auto& session : data.sessions) {
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
      for (const auto& batch : make_batches(session.train.size(), config.batch_size, rng)) {
        const auto b = static_cast<Index>(batch.size());
        Matrix pooled(b, data.dim);
        Vector truth(b);
        for (Index i = 0; i < b; ++i) {
          const auto& s = session.train[batch[static_cast<std::size_t>(i)]];
          pooled.row(i) = s.features.frames.colwise().mean();
          truth(i) = s.score;
        }
        const Vector eps = config.reparameterize ? gaussian_sample(rng, b) : Vector::Zero(b);
        const auto pass = head_forward(head, pooled, eps, config.reparameterize);
        LossValue loss;
        try {
          loss = combined_loss(pass.scores, truth, config.weights.lambda);
        } catch (const DegenerateBatch&) {
          continue;
        }
        trace.push_back({loss.value, correlation_loss(pass.scores, truth).value});

        Vector params(head.net.parameter_count()), grads(head.net.parameter_count());
        head.net.pack(params);
        head_backward(head, pass, loss.grad).net.pack(grads);
        adam_step(opt, params, grads);
        head.net.unpack(params);
      }
    }
  }
  return trace;
}

}  // namespace reference
