#include <cstring>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "pdistill/autodiff/grad_check.h"
#include "pdistill/autodiff/ops.h"
#include "pdistill/common/rng.h"
#include "pdistill/model/checkpoint.h"
#include "pdistill/model/model.h"

using namespace pdistill;
using namespace pdistill::model;
using ad::Graph;
using ad::Tensor;

namespace {

Tensor random_tensor(ad::Shape shape, Rng& rng, double scale = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.data) v = scale * rng.uniform(-1.0, 1.0);
  return t;
}

Matrix random_matrix(int rows, int cols, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.uniform(-1.0, 1.0);
  return m;
}

ModelDims small_dims() {
  ModelDims d;
  d.hidden = 5;
  d.mel_channels = 7;
  d.lstm_hidden = 4;
  return d;
}

}  // namespace

TEST_CASE("prosody encoder preserves the frame count") {
  const ModelConfig cfg = make_model_config(Arch::Teacher, small_dims(), 4);
  const Model m = Model::build(cfg, 1);
  Rng rng(2);
  for (int T = 1; T <= 30; ++T) {
    Graph g;
    Binding b(g, m.params(), false);
    const Var z = prosody_encoder_forward(g.constant(random_tensor({T, 6}, rng)), b, cfg.encoder);
    CHECK(z.dim(0) == T);
    CHECK(z.dim(1) == 5);
  }
}

TEST_CASE("prosody encoder maps zero input to zero with zero-bias init") {
  const ModelConfig cfg = make_model_config(Arch::Teacher, ModelDims{}, 8);
  const Model m = Model::build(cfg, 3);
  Graph g;
  Binding b(g, m.params(), false);
  const Var z = prosody_encoder_forward(g.constant(Tensor::zeros({11, 6})), b, cfg.encoder);
  for (double v : z.value()) CHECK(v == 0.0);
}

TEST_CASE("prosody encoder at the full channel width") {
  ModelDims d;
  d.hidden = 512;
  const ModelConfig cfg = make_model_config(Arch::Teacher, d, 60);
  const Model m = Model::build(cfg, 0);
  Graph g;
  Binding b(g, m.params(), false);
  CHECK(prosody_encoder_forward(g.constant(Tensor::zeros({4, 6})), b, cfg.encoder).dim(1) == 512);
}

TEST_CASE("encoder rejects a channel mismatch") {
  const ModelConfig cfg = make_model_config(Arch::Teacher, small_dims(), 4);
  const Model m = Model::build(cfg, 1);
  Graph g;
  Binding b(g, m.params(), false);
  CHECK_THROWS_AS(prosody_encoder_forward(g.constant(Tensor::zeros({4, 5})), b, cfg.encoder), Error);
}

TEST_CASE("acoustic encoder frame reduction") {
  for (int ds : {1, 2}) {
    ModelDims d = small_dims();
    d.downsample = ds;
    const ModelConfig cfg = make_model_config(Arch::BaselinePlain, d, 4);
    const Model m = Model::build(cfg, 1);
    Graph g;
    Binding b(g, m.params(), false);
    const Var z = acoustic_encoder_forward(g.constant(Tensor::zeros({498, 7})), b, cfg.encoder);
    CHECK(z.dim(0) == (ds == 2 ? 249 : 498));
    CHECK(m.output_frames(498) == z.dim(0));
  }
}

TEST_CASE("sap edge cases") {
  Graph g;
  Rng rng(4);
  // T = 1
  const Var f1 = g.constant(random_tensor({1, 3}, rng));
  const SapResult one = sap_forward(f1, f1, g.constant(random_tensor({3, 1}, rng)));
  CHECK(one.attention.value() == std::vector<double>{1.0});
  CHECK(one.pooled.value() == f1.value());

  // w = 0 -> frame mean
  const Tensor feats = random_tensor({6, 3}, rng);
  const Var f = g.constant(feats);
  const SapResult uni = sap_forward(f, f, g.constant(Tensor::zeros({3, 1})));
  for (int c = 0; c < 3; ++c) {
    double mean = 0.0;
    for (int t = 0; t < 6; ++t) mean += feats.data[t * 3 + c];
    CHECK(uni.pooled.value()[c] == doctest::Approx(mean / 6).epsilon(1e-12));
  }

  // One key scored 50 above the rest saturates the softmax: the pooled
  // error is bounded by (T-1) e^-50 max|f|.
  Tensor keys = Tensor::zeros({6, 1});
  keys.data[4] = 50.0;
  const SapResult sat = sap_forward(f, g.constant(keys), g.constant(Tensor({1, 1}, {1.0})));
  for (int c = 0; c < 3; ++c) CHECK(std::abs(sat.pooled.value()[c] - feats.data[4 * 3 + c]) < 1e-6);

  CHECK_THROWS_AS(sap_forward(f, g.constant(Tensor::zeros({5, 1})), g.constant(Tensor::zeros({1, 1}))), Error);
}

TEST_CASE("sap attention is a distribution and shift invariant") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const int T = 1 + static_cast<int>(rng.below(40));
    Graph g;
    const Var f = g.constant(random_tensor({T, 4}, rng, 3.0));
    const Tensor w = random_tensor({4, 1}, rng, 3.0);
    const SapResult r = sap_forward(f, f, g.constant(w));
    double s = 0.0;
    for (double a : r.attention.value()) {
      CHECK(a >= 0.0);
      s += a;
    }
    CHECK(std::abs(s - 1.0) < 1e-6);

    // Appending a constant key column with weight 1 adds the same score to every frame.
    const Var shifted_keys = ad::concat_cols(f, g.constant(Tensor({T, 1}, std::vector<double>(T, 1.0))));
    Tensor w2 = w;
    w2.shape = {5, 1};
    w2.data.push_back(7.5);
    const SapResult r2 = sap_forward(f, shifted_keys, g.constant(w2));
    for (int t = 0; t < T; ++t) CHECK(std::abs(r.attention.value()[t] - r2.attention.value()[t]) < 1e-7);
  }
}

TEST_CASE("prosody-attention weights ignore the acoustic features") {
  const ModelConfig cfg = make_model_config(Arch::BaselinePlain, small_dims(), 4, true);
  const Model m = Model::build(cfg, 9);
  Rng rng(6);
  const Matrix prosody = random_matrix(12, 6, rng);
  const Matrix mel_a = random_matrix(12, 7, rng);
  const Matrix mel_b = random_matrix(12, 7, rng);
  Graph ga, gb;
  const auto oa = m.forward(ga, Binding(ga, m.params(), false), &mel_a, &prosody);
  const auto ob = m.forward(gb, Binding(gb, m.params(), false), &mel_b, &prosody);
  REQUIRE(oa.attention.size() == 6);
  CHECK(std::memcmp(oa.attention.value().data(), ob.attention.value().data(), 6 * sizeof(double)) == 0);
  CHECK(oa.pooled.value() != ob.pooled.value());
}

TEST_CASE("align_frames") {
  Graph g;
  const Var x = g.constant(Tensor({4, 1}, {1.0, 3.0, 5.0, 7.0}));
  CHECK(align_frames(x, 4).value() == x.value());
  CHECK(align_frames(x, 2).value() == std::vector<double>{2.0, 6.0});
  const Var odd = g.constant(Tensor::zeros({499, 2}));
  CHECK(align_frames(odd, 249).dim(0) == 249);
  CHECK(align_frames(odd, 250).dim(0) == 250);
  CHECK_THROWS_AS(align_frames(x, 1), Error);
  CHECK_THROWS_AS(align_frames(x, 3), Error);
  CHECK_THROWS_AS(align_frames(x, 5), Error);
}

TEST_CASE("teacher parameter count matches the closed form") {
  const ModelConfig cfg = make_model_config(Arch::Teacher, ModelDims{}, 8);
  const Model m = Model::build(cfg, 0);
  const std::size_t closed = (6 * 64 * 5 + 64) + 2 * (64 * 64 * 5 + 64) + 64 + (64 * 8 + 8);
  std::size_t enumerated = 0;
  for (const auto& [name, shape] : parameter_layout(cfg)) enumerated += ad::numel(shape);
  CHECK(enumerated == closed);
  CHECK(m.params().scalar_count() == closed);
}

TEST_CASE("seeded builds are identical") {
  for (Arch a : {Arch::Teacher, Arch::Student, Arch::BaselinePlain, Arch::BaselineLocalConcat}) {
    const ModelConfig cfg = make_model_config(a, small_dims(), 5);
    CHECK(Model::build(cfg, 77).params() == Model::build(cfg, 77).params());
    CHECK(!(Model::build(cfg, 77).params() == Model::build(cfg, 78).params()));
  }
}

TEST_CASE("local-concat baseline at the published LSTM width") {
  ModelDims d;
  d.lstm_hidden = 256;
  d.hidden = 512;
  const ModelConfig cfg = make_model_config(Arch::BaselineLocalConcat, d, 60);
  const auto layout = parameter_layout(cfg);
  bool found = false;
  for (const auto& [name, shape] : layout) {
    if (name == "lstm.l0.w_ih") {
      CHECK(shape == ad::Shape{512 + 6, 4 * 256});
      found = true;
    }
    if (name == "lstm.l1.w_hh") CHECK(shape == ad::Shape{256, 4 * 256});
  }
  CHECK(found);
  CHECK(cfg.lstm_layers == 2);
}

TEST_CASE("prosody attention changes only the SAP key dimension") {
  const auto plain = parameter_layout(make_model_config(Arch::BaselinePlain, ModelDims{}, 8));
  const auto pa = parameter_layout(make_model_config(Arch::BaselinePlain, ModelDims{}, 8, true));
  REQUIRE(plain.size() == pa.size());
  for (std::size_t i = 0; i < plain.size(); ++i) {
    CHECK(plain[i].first == pa[i].first);
    if (plain[i].first == "sap.w") {
      CHECK(plain[i].second == ad::Shape{64, 1});
      CHECK(pa[i].second == ad::Shape{6, 1});
    } else {
      CHECK(plain[i].second == pa[i].second);
    }
  }
}

TEST_CASE("config validation") {
  CHECK_THROWS_AS(parse_arch("Transformer"), ConfigError);
  CHECK_THROWS_AS(make_model_config(Arch::Teacher, ModelDims{}, 1), ConfigError);
  CHECK_THROWS_AS(make_model_config(Arch::Teacher, ModelDims{}, 8, true), ConfigError);
  ModelDims even;
  even.kernel = 4;
  CHECK_THROWS_AS(make_model_config(Arch::Student, even, 8), ConfigError);
  const ModelConfig cfg = make_model_config(Arch::BaselineLocalConcat, ModelDims{}, 8, true);
  CHECK(nlohmann::json(cfg).get<ModelConfig>() == cfg);
}

TEST_CASE("every architecture's CE loss passes the gradient check") {
  for (Arch a : {Arch::Teacher, Arch::Student, Arch::BaselinePlain, Arch::BaselineLocalConcat}) {
    for (bool pa : {false, true}) {
      if (pa && a == Arch::Teacher) continue;
      for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const ModelConfig cfg = make_model_config(a, small_dims(), 3, pa);
        const Model m = Model::build(cfg, seed);
        Rng rng(derive_seed(seed, to_string(a)));
        const int T = 2 + static_cast<int>(rng.below(11));
        const Tensor mel = random_tensor({T, 7}, rng);
        const Tensor prosody = random_tensor({T, 6}, rng);
        const int label = static_cast<int>(rng.below(3));
        std::vector<Tensor> inputs;
        for (const auto& p : m.params().items()) inputs.push_back(p.value);
        // Nudge biases off zero so GELU is exercised away from the origin.
        for (auto& t : inputs)
          for (double& v : t.data) v += 0.05 * rng.uniform(-1.0, 1.0);
        const auto r = ad::grad_check(
            [&](Graph& g, const std::vector<Var>& vars) {
              const Binding b(m.params(), vars);
              const auto out = m.forward(b, g.constant(mel), g.constant(prosody));
              return ad::cross_entropy(out.logits, label);
            },
            inputs);
        INFO(to_string(a) << " pa=" << pa << " seed=" << seed << " T=" << T);
        CHECK(r.max_rel_err < 1e-3);
      }
    }
  }
}

TEST_CASE("checkpoint round trip is byte identical") {
  const ModelConfig cfg = make_model_config(Arch::BaselineLocalConcat, small_dims(), 4, true);
  const Model m = Model::build(cfg, 21);
  const auto ckpt = make_checkpoint(m, {{"epoch", 3}, {"best_validation_accuracy", 0.625}, {"seed", 21}});
  const auto dir = std::filesystem::temp_directory_path() / "pd_ckpt_test";
  std::filesystem::create_directories(dir);
  save_checkpoint(ckpt, dir / "a.ckpt");
  const ModelCheckpoint loaded = load_checkpoint(dir / "a.ckpt");
  save_checkpoint(loaded, dir / "b.ckpt");
  const std::string a = serialize_checkpoint(ckpt);
  const std::string b = serialize_checkpoint(load_checkpoint(dir / "b.ckpt"));
  CHECK(a == b);
  CHECK(loaded.config == cfg);
  CHECK(loaded.metadata["epoch"] == 3);
  CHECK(a.substr(0, 4) == "PDCK");
  CHECK(static_cast<unsigned char>(a[4]) == 1);
}

TEST_CASE("checkpoint error paths are distinct") {
  using Kind = CheckpointError::Kind;
  const Model m = Model::build(make_model_config(Arch::Teacher, small_dims(), 4), 1);
  const std::string bytes = serialize_checkpoint(make_checkpoint(m));

  auto kind_of = [](const std::string& b) {
    try {
      parse_checkpoint(b);
    } catch (const CheckpointError& e) {
      return e.kind();
    }
    FAIL("expected a checkpoint error");
    return Kind::Malformed;
  };

  CHECK(kind_of(bytes.substr(0, bytes.size() - 3)) == Kind::Truncated);
  CHECK_THROWS_WITH(parse_checkpoint(bytes.substr(0, bytes.size() - 3)),
                    doctest::Contains("truncated checkpoint"));

  std::string wrong_version = bytes;
  wrong_version[4] = 2;
  CHECK(kind_of(wrong_version) == Kind::VersionMismatch);

  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK(kind_of(bad_magic) == Kind::BadMagic);

  // Corrupt the shape of the head weight in the JSON header; keep the length.
  std::string corrupt = bytes;
  const std::string needle = "\"name\":\"head.weight\",\"offset\":";
  const auto pos = corrupt.find("[5,4]", corrupt.find(needle));
  REQUIRE(pos != std::string::npos);
  corrupt.replace(pos, 5, "[4,5]");
  CHECK(kind_of(corrupt) == Kind::ShapeMismatch);
  CHECK_THROWS_WITH(parse_checkpoint(corrupt), doctest::Contains("head.weight"));
}
