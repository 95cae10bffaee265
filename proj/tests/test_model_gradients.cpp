#include <doctest.h>

#include "deskmt/model.hpp"
#include "deskmt/rng.hpp"

using namespace deskmt;

namespace {

ModelConfig tiny_config(int layers, double dropout) {
  ModelConfig c;
  c.emb_dim = 3;
  c.hidden_dim = 4;
  c.num_layers = layers;
  c.src_vocab_size = 9;
  c.tgt_vocab_size = 8;
  c.dropout_p = dropout;
  c.max_decode_len = 10;
  return c;
}

std::vector<EncodedPair> tiny_batch() {
  return {{{4, 5, 6}, {4, 7}}, {{8, 4}, {5, 6, 7, 4}}, {{5}, {6}}};
}

nn::GradCheckReport check_model(int layers, double dropout) {
  const ModelConfig cfg = tiny_config(layers, dropout);
  Rng init_rng(11);
  auto params = ModelParams<double>::init(cfg, init_rng);
  // widen the init so the check exercises non-trivial curvature
  params.visit([](const std::string&, nn::Matrix<double>& m) { m *= 3.0; });
  const auto batch = tiny_batch();
  auto loss = [&]() {
    Rng rng(5);
    return training_loss<double>(params, cfg, batch, nn::Mode::train, &rng, nullptr);
  };
  auto grads = ModelParams<double>::zeros(cfg);
  Rng rng(5);
  training_loss<double>(params, cfg, batch, nn::Mode::train, &rng, &grads);

  std::vector<nn::ParamGroup> groups;
  std::vector<nn::Matrix<double>*> values;
  params.visit([&](const std::string& name, nn::Matrix<double>& m) {
    groups.push_back({name, &m, nullptr});
  });
  std::size_t i = 0;
  grads.visit([&](const std::string&, const nn::Matrix<double>& g) { groups[i++].analytic = &g; });
  return nn::grad_check(loss, groups);
}

}  // namespace

TEST_CASE("model gradients match finite differences without dropout") {
  for (int layers : {1, 2}) {
    const auto report = check_model(layers, 0.0);
    for (const auto& g : report.groups) {
      CAPTURE(g.group);
      CAPTURE(g.max_rel_error);
      CHECK(g.passed);
    }
  }
}

TEST_CASE("model gradients match finite differences with a fixed dropout mask") {
  const auto report = check_model(2, 0.3);
  for (const auto& g : report.groups) {
    CAPTURE(g.group);
    CAPTURE(g.max_rel_error);
    CHECK(g.passed);
  }
}
