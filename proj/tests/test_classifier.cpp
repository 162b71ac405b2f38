#include <cmath>
#include <vector>

#include <doctest.h>

#include "hypomimia/classifier.hpp"
#include "hypomimia/errors.hpp"
#include "hypomimia/rng.hpp"

using namespace hypomimia;

namespace {

RnnConfig small_config() {
  RnnConfig c;
  c.input_dim = 4;
  c.hidden_dim = 8;
  c.num_layers = 2;
  c.residual = true;
  return c;
}

ClassifierSequence random_sequence(std::size_t dim, SeededRng& rng,
                                   SequenceMode mode = SequenceMode::Raw) {
  ClassifierSequence seq;
  seq.mode = mode;
  for (int t = 0; t < 4; ++t) {
    Tensor step({dim});
    for (double& v : step.data()) v = rng.normal();
    seq.timesteps.push_back(std::move(step));
  }
  return seq;
}

void zero_params_with_prefix(ParameterStore& store, std::string_view prefix) {
  for (ParamId id : store.all()) {
    if (store.name(id).starts_with(prefix)) {
      for (double& v : store.value(id).data()) v = 0.0;
    }
  }
}

// Two well-separated clusters: PD sequences sit near -1, HC near +1.
std::vector<LabeledSequence> separable_dataset(std::size_t per_class,
                                               std::size_t dim, SeededRng& rng) {
  std::vector<LabeledSequence> out;
  for (std::size_t i = 0; i < per_class; ++i) {
    for (Diagnosis d : {Diagnosis::HC, Diagnosis::PD}) {
      double center = d == Diagnosis::HC ? 1.0 : -1.0;
      ClassifierSequence seq;
      seq.mode = SequenceMode::Raw;
      for (int t = 0; t < 4; ++t) {
        Tensor step({dim});
        for (double& v : step.data()) v = center + 0.1 * rng.normal();
        seq.timesteps.push_back(std::move(step));
      }
      out.emplace_back(std::move(seq), d);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("classifier config validation") {
  RnnConfig c = small_config();
  CHECK_NOTHROW(c.validate());
  c.num_layers = 1;
  c.residual = true;  // skips need at least two layers
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config();
  c.dropout = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config();
  c.dropout = -0.1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config();
  c.hidden_dim = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config();
  c.num_layers = 1;
  c.residual = false;
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("all-zero parameters yield an even coin flip") {
  DiagnosisClassifier model(small_config(), 1);
  zero_params_with_prefix(model.params(), "");
  SeededRng rng(2);
  ClassifierSequence seq = random_sequence(4, rng);
  DiagnosisOutput out = model.rnn_forward(seq);
  CHECK(out.logits[0] == 0.0);
  CHECK(out.logits[1] == 0.0);
  CHECK(out.probability_pd == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(out.predicted == Diagnosis::HC);  // strict inequality breaks the tie
}

TEST_CASE("zeroed recurrence leaves exactly the head bias") {
  DiagnosisClassifier model(small_config(), 3);
  zero_params_with_prefix(model.params(), "rnn.");
  ParamId b = *model.params().find("head.b");
  model.params().value(b).data()[0] = 0.3;
  model.params().value(b).data()[1] = -0.2;
  SeededRng rng(4);
  DiagnosisOutput out = model.rnn_forward(random_sequence(4, rng));
  CHECK(out.logits[0] == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(out.logits[1] == doctest::Approx(-0.2).epsilon(1e-15));
  CHECK(out.predicted == Diagnosis::HC);
}

TEST_CASE("residual skip is exact when a layer's parameters vanish") {
  for (CellKind kind : {CellKind::LSTM, CellKind::GRU}) {
    RnnConfig c = small_config();
    c.cell = kind;
    DiagnosisClassifier model(c, 5);
    zero_params_with_prefix(model.params(), "rnn.layer2.");
    SeededRng rng(6);
    ClassifierSequence seq = random_sequence(4, rng);
    auto first = model.layer_outputs(seq, 1);
    auto second = model.layer_outputs(seq, 2);
    REQUIRE(first.size() == seq.timesteps.size());
    REQUIRE(second.size() == first.size());
    for (std::size_t t = 0; t < first.size(); ++t) {
      // GRU: h = (1-z) h_prev + z c with z = sigmoid(0) = 1/2 and c = tanh(0)
      // = 0, so the cell body decays toward zero and the skip restores the
      // input exactly only for LSTM-style additive output... both cells emit
      // zero from all-zero parameters and zero state on the FIRST step, and
      // the residual adds the layer input back, so output == input + cell(t).
      // Checking the exact identity requires the cell body to be zero, which
      // holds for LSTM (o*tanh(c) with o=1/2, c decaying from 0 stays 0).
      if (kind == CellKind::LSTM) {
        CHECK(second[t] == first[t]);
      } else {
        // GRU body from zero params is identically zero as well: z=1/2,
        // candidate tanh(0)=0, h = (1-z)*h_prev. h starts at 0 so stays 0.
        CHECK(second[t] == first[t]);
      }
    }
  }
}

TEST_CASE("without the skip a zeroed layer erases the signal") {
  RnnConfig c = small_config();
  c.residual = false;
  DiagnosisClassifier model(c, 7);
  zero_params_with_prefix(model.params(), "rnn.layer2.");
  ParamId b = *model.params().find("head.b");
  model.params().value(b).data()[0] = 0.7;
  model.params().value(b).data()[1] = 0.1;
  SeededRng rng(8);
  ClassifierSequence seq = random_sequence(4, rng);
  DiagnosisOutput out = model.rnn_forward(seq);
  // layer 2 emits zeros, so only the head bias survives
  CHECK(out.logits[0] == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(out.logits[1] == doctest::Approx(0.1).epsilon(1e-15));

  RnnConfig cr = small_config();
  DiagnosisClassifier with_skip(cr, 7);
  zero_params_with_prefix(with_skip.params(), "rnn.layer2.");
  ParamId b2 = *with_skip.params().find("head.b");
  with_skip.params().value(b2).data()[0] = 0.7;
  with_skip.params().value(b2).data()[1] = 0.1;
  DiagnosisOutput kept = with_skip.rnn_forward(seq);
  CHECK(kept.logits[0] != doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("probability and argmax agree with the logits") {
  DiagnosisClassifier model(small_config(), 9);
  SeededRng rng(10);
  for (int trial = 0; trial < 10; ++trial) {
    ClassifierSequence seq = random_sequence(4, rng);
    DiagnosisOutput out = model.rnn_forward(seq);
    double denom = std::exp(out.logits[0]) + std::exp(out.logits[1]);
    CHECK(out.probability_pd ==
          doctest::Approx(std::exp(out.logits[1]) / denom).epsilon(1e-12));
    CHECK(out.predicted ==
          (out.logits[1] > out.logits[0] ? Diagnosis::PD : Diagnosis::HC));
    DiagnosisOutput again = model.rnn_forward(seq);
    CHECK(again.logits[0] == out.logits[0]);
    CHECK(again.logits[1] == out.logits[1]);
  }
}

TEST_CASE("sequence dimension mismatches are rejected") {
  DiagnosisClassifier model(small_config(), 11);  // expects input_dim 4
  SeededRng rng(12);
  ClassifierSequence wide = random_sequence(12, rng, SequenceMode::Processed);
  CHECK_THROWS_AS(model.rnn_forward(wide), ShapeError);
}

TEST_CASE("predict assembles the requested mode") {
  SeededRng rng(13);
  IntensityRecord record;
  record.subject_id = "p";
  for (double& v : record.values) v = rng.uniform(0.1, 5.0);

  RnnConfig raw_cfg = small_config();  // input_dim 4
  DiagnosisClassifier raw_model(raw_cfg, 14);
  DiagnosisOutput raw_out = predict(record, SequenceMode::Raw, raw_model);
  DiagnosisOutput manual =
      raw_model.rnn_forward(assemble_sequence(record, SequenceMode::Raw));
  CHECK(raw_out.logits[0] == manual.logits[0]);
  CHECK(raw_out.logits[1] == manual.logits[1]);

  RnnConfig proc_cfg = small_config();
  proc_cfg.input_dim = 12;
  DiagnosisClassifier proc_model(proc_cfg, 15);
  CHECK_NOTHROW(predict(record, SequenceMode::Processed, proc_model));
  CHECK_THROWS_AS(predict(record, SequenceMode::Processed, raw_model),
                  ShapeError);
}

TEST_CASE("zero epochs leave parameters untouched") {
  RnnConfig c = small_config();
  DiagnosisClassifier model(c, 16);
  DiagnosisClassifier untouched(c, 16);
  SeededRng rng(17);
  auto data = separable_dataset(4, 4, rng);
  ClassifierTrainConfig tc;
  tc.epochs = 0;
  auto history = train_classifier(model, data, tc);
  CHECK(history.empty());
  for (ParamId id : model.params().all()) {
    CHECK(model.params().value(id) ==
          untouched.params().value(
              *untouched.params().find(model.params().name(id))));
  }
}

TEST_CASE("training is deterministic per seed") {
  RnnConfig c = small_config();
  SeededRng rng(18);
  auto data = separable_dataset(6, 4, rng);
  ClassifierTrainConfig tc;
  tc.epochs = 5;
  tc.batch_size = 4;

  DiagnosisClassifier m1(c, 19), m2(c, 19);
  auto h1 = train_classifier(m1, data, tc);
  auto h2 = train_classifier(m2, data, tc);
  REQUIRE(h1.size() == h2.size());
  for (std::size_t i = 0; i < h1.size(); ++i) {
    CHECK(h1[i].loss == h2[i].loss);
    CHECK(h1[i].accuracy == h2[i].accuracy);
    CHECK(h1[i].epoch == i + 1);
  }
  for (ParamId id : m1.params().all()) {
    CHECK(m1.params().value(id) == m2.params().value(id));
  }
}

TEST_CASE("training rejects degenerate datasets") {
  DiagnosisClassifier model(small_config(), 20);
  ClassifierTrainConfig tc;
  CHECK_THROWS_AS(train_classifier(model, {}, tc), DataError);
  SeededRng rng(21);
  auto data = separable_dataset(3, 4, rng);
  std::vector<LabeledSequence> one_class;
  for (auto& [seq, diag] : data) {
    if (diag == Diagnosis::PD) one_class.emplace_back(seq, diag);
  }
  CHECK_THROWS_AS(train_classifier(model, one_class, tc), DataError);
}

TEST_CASE("separable clusters are learned to full accuracy") {
  for (CellKind kind : {CellKind::LSTM, CellKind::GRU}) {
    RnnConfig c;
    c.cell = kind;
    c.input_dim = 4;
    c.hidden_dim = 16;
    c.num_layers = 2;
    c.residual = true;
    SeededRng rng(22);
    auto data = separable_dataset(8, 4, rng);
    DiagnosisClassifier model(c, 23);
    ClassifierTrainConfig tc;
    tc.epochs = 200;
    tc.batch_size = 8;
    auto history = train_classifier(model, data, tc);
    REQUIRE_FALSE(history.empty());
    double best = 0.0;
    for (const EpochStats& e : history) best = std::max(best, e.accuracy);
    CHECK(best == 1.0);
    std::size_t correct = 0;
    for (const auto& [seq, diag] : data) {
      if (model.rnn_forward(seq).predicted == diag) ++correct;
    }
    CHECK(correct == data.size());
  }
}

TEST_CASE("dropout only perturbs training, never inference") {
  RnnConfig c = small_config();
  c.dropout = 0.5;
  DiagnosisClassifier model(c, 24);
  SeededRng rng(25);
  ClassifierSequence seq = random_sequence(4, rng);
  DiagnosisOutput a = model.rnn_forward(seq);
  DiagnosisOutput b = model.rnn_forward(seq);
  CHECK(a.logits[0] == b.logits[0]);
  CHECK(a.logits[1] == b.logits[1]);

  // with an rng attached, the forward differs between draws
  Tape t1;
  TapeBinding p1(t1, static_cast<const ParameterStore&>(model.params()));
  SeededRng d1(26);
  Var v1 = model.forward_logits(t1, p1, seq, &d1);
  Tape t2;
  TapeBinding p2(t2, static_cast<const ParameterStore&>(model.params()));
  SeededRng d2(27);
  Var v2 = model.forward_logits(t2, p2, seq, &d2);
  CHECK(t1.value(v1) != t2.value(v2));
}
