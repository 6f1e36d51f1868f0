// PL-CSD model and loss tests: forward contracts, the hand-derived loss
// values, loss properties, frozen-group training semantics, and
// finite-difference gradient checks on a miniature model.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "csd/corpus/synthetic.hpp"
#include "csd/plcsd/losses.hpp"
#include "csd/plcsd/model.hpp"
#include "csd/plcsd/train.hpp"

using namespace csd;

namespace {

PlcsdConfig mini_config() {
  PlcsdConfig cfg;
  cfg.d_c = 4;
  cfg.d_s = 4;
  cfg.encoder_width = 8;
  cfg.decoder_width = 8;
  cfg.classifier_hidden = 6;
  cfg.discriminator_width = 6;
  cfg.batch_size = 4;
  cfg.max_decode_frames = 20;
  cfg.seed = 3;
  return cfg;
}

SyntheticConfig mini_synth() {
  SyntheticConfig scfg;
  scfg.n_phones = 4;
  scfg.n_styles = 2;
  scfg.n_mels = 5;
  scfg.min_frames = 1;
  scfg.max_frames = 3;
  return scfg;
}

PhoneSegment make_segment(const std::string& utt, int index,
                          const std::string& phone, const Eigen::MatrixXf& data) {
  PhoneSegment seg;
  seg.utterance_id = utt;
  seg.index_in_utterance = index;
  seg.phone = phone;
  seg.first_frame = 0;
  seg.mel.data = data;
  seg.mel.frame_shift = 0.01;
  return seg;
}

}  // namespace

TEST_CASE("encoder contracts") {
  PlcsdConfig cfg = mini_config();
  ModelParams params = init_plcsd_params(cfg, 5, 4);

  Eigen::MatrixXf one = Eigen::MatrixXf::Random(5, 1);
  Eigen::MatrixXf five(5, 5);
  for (int i = 0; i < 5; ++i) five.col(i) = one.col(0);

  PhoneSegment s1 = make_segment("u", 0, "P00", one);
  PhoneSegment s5 = make_segment("u", 1, "P00", five);

  SECTION("determinism and shape") {
    ContentEmbedding a = encode_content(s1, params);
    ContentEmbedding b = encode_content(s1, params);
    REQUIRE(a.values == b.values);
    REQUIRE(a.dim() == cfg.d_c);
    StyleEmbedding c = encode_style(s1, params);
    REQUIRE(c.dim() == cfg.d_s);
  }

  SECTION("variable length accepted") {
    REQUIRE(encode_content(s1, params).dim() == cfg.d_c);
    REQUIRE(encode_content(s5, params).dim() == cfg.d_c);
  }

  SECTION("identical segments give identical embeddings") {
    PhoneSegment copy = make_segment("other", 9, "P01", one);
    REQUIRE(encode_content(s1, params).values ==
            encode_content(copy, params).values);
    REQUIRE(encode_style(s1, params).values ==
            encode_style(copy, params).values);
  }
}

TEST_CASE("classifier contracts") {
  PlcsdConfig cfg = mini_config();
  long n_phones = 4;
  ModelParams params = init_plcsd_params(cfg, 5, n_phones);
  Rng rng(17);
  Eigen::VectorXd z(cfg.d_c);
  for (long i = 0; i < cfg.d_c; ++i) z(i) = rng.normal();

  SECTION("valid posterior") {
    PhonePosterior p = classify_content_phone({z}, params);
    p.validate();
    REQUIRE(p.probs.size() == n_phones);
    REQUIRE(p.probs.sum() == Catch::Approx(1.0).margin(1e-6));
  }

  SECTION("zero final layer gives the uniform posterior") {
    params.group(plcsd_groups::content_classifier).tensor("fc2.w").value.setZero();
    params.group(plcsd_groups::content_classifier).tensor("fc2.b").value.setZero();
    PhonePosterior p = classify_content_phone({z}, params);
    for (long i = 0; i < n_phones; ++i)
      REQUIRE(p.probs(i) == Catch::Approx(0.25).margin(1e-12));
  }

  SECTION("identical embeddings, identical posteriors") {
    PhonePosterior a = classify_style_phone({z}, params);
    PhonePosterior b = classify_style_phone({z}, params);
    REQUIRE(a.probs == b.probs);
  }

  SECTION("dimension mismatch is an error") {
    Eigen::VectorXd bad(cfg.d_c + 1);
    bad.setZero();
    REQUIRE_THROWS_AS(classify_content_phone({bad}, params), validation_error);
  }
}

TEST_CASE("discriminator contracts") {
  PlcsdConfig cfg = mini_config();
  ModelParams params = init_plcsd_params(cfg, 5, 4);
  MelSpectrogram one;
  one.data = Eigen::MatrixXf::Random(5, 1);
  MelSpectrogram hundred;
  hundred.data = Eigen::MatrixXf::Random(5, 100);

  double p1 = discriminate_segment(one, params);
  double p100 = discriminate_segment(hundred, params);
  REQUIRE(p1 > 0.0);
  REQUIRE(p1 < 1.0);
  REQUIRE(p100 > 0.0);
  REQUIRE(p100 < 1.0);
  REQUIRE(discriminate_segment(one, params) == p1);
  MelSpectrogram empty;
  empty.data.resize(5, 0);
  REQUIRE_THROWS_AS(discriminate_segment(empty, params), validation_error);
}

TEST_CASE("decoder contracts") {
  PlcsdConfig cfg = mini_config();
  ModelParams params = init_plcsd_params(cfg, 5, 4);
  ContentEmbedding zc{Eigen::VectorXd::Constant(cfg.d_c, 0.3)};
  StyleEmbedding zs{Eigen::VectorXd::Constant(cfg.d_s, -0.2)};

  SECTION("teacher forcing fixes the length") {
    MelSpectrogram teacher;
    teacher.data = Eigen::MatrixXf::Random(5, 7);
    teacher.frame_shift = 0.01;
    DecodeResult r = decode_segment(zc, zs, &teacher, params, cfg);
    REQUIRE(r.mel.n_frames() == 7);
    REQUIRE(r.gates.probs.size() == 7);
    REQUIRE_FALSE(r.truncated);
  }

  SECTION("gate forced high stops after one frame") {
    params.group(plcsd_groups::decoder).tensor("gate.b").value(0, 0) = 100.0;
    DecodeResult r = decode_segment(zc, zs, nullptr, params, cfg);
    REQUIRE(r.mel.n_frames() == 1);
    REQUIRE(r.gates.probs.size() == 1);
    REQUIRE_FALSE(r.truncated);
  }

  SECTION("gate forced low truncates at max frames") {
    params.group(plcsd_groups::decoder).tensor("gate.b").value(0, 0) = -100.0;
    DecodeResult r = decode_segment(zc, zs, nullptr, params, cfg);
    REQUIRE(r.mel.n_frames() == cfg.max_decode_frames);
    REQUIRE(r.truncated);
  }
}

TEST_CASE("auto loss oracle values") {
  SECTION("perfect reconstruction zeroes the spectrogram term") {
    Eigen::MatrixXf target = Eigen::MatrixXf::Random(3, 2);
    REQUIRE(auto_loss_spec_term(target, target) == 0.0);
    // gates at their clipped targets leave only the epsilon floor
    double eps = 1e-7;
    double gate = auto_loss_gate_term({eps, 1.0 - eps}, eps);
    REQUIRE(gate == Catch::Approx(-2.0 * std::log(1.0 - eps) / 2.0).margin(1e-12));
    REQUIRE(gate < 1e-6);
  }

  SECTION("single 1-frame segment with difference delta") {
    Eigen::MatrixXf target(3, 1), pred(3, 1);
    target << 0.5f, -1.0f, 2.0f;
    Eigen::Vector3f delta(0.1f, -0.2f, 0.3f);
    pred = target + delta;
    // delta as realized in f32 storage
    double expected = (pred - target).cast<double>().squaredNorm();
    REQUIRE(auto_loss_spec_term(pred, target) ==
            Catch::Approx(expected).epsilon(1e-12));
    REQUIRE(expected == Catch::Approx(0.14).epsilon(1e-6));
  }

  SECTION("duplicating the batch doubles the loss") {
    PlcsdConfig cfg = mini_config();
    auto corpus = make_synthetic_corpus(mini_synth(), 6, 5);
    ModelParams params = init_plcsd_params(cfg, 5, 4);
    SegmentBatch batch = as_batch(corpus.segments);
    double once = auto_loss(batch, params, cfg);
    SegmentBatch doubled = batch;
    doubled.insert(doubled.end(), batch.begin(), batch.end());
    double twice = auto_loss(doubled, params, cfg);
    REQUIRE(twice == Catch::Approx(2.0 * once).epsilon(1e-12));
    REQUIRE(once >= 0.0);
  }
}

TEST_CASE("classification loss oracle values") {
  long n = 39;
  Eigen::VectorXd uniform = Eigen::VectorXd::Constant(n, 1.0 / 39.0);
  REQUIRE(cross_entropy_from_posterior(uniform, 7) ==
          Catch::Approx(std::log(39.0)).epsilon(1e-12));

  Eigen::VectorXd certain = Eigen::VectorXd::Zero(4);
  certain(2) = 1.0;
  REQUIRE(cross_entropy_from_posterior(certain, 2) ==
          Catch::Approx(0.0).margin(1e-6));

  Eigen::VectorXd half(2);
  half << 0.5, 0.5;
  REQUIRE(cross_entropy_from_posterior(half, 0) ==
          Catch::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("contrast loss oracle values") {
  SECTION("distinct phones contribute nothing") {
    std::vector<std::pair<std::string, Eigen::VectorXd>> items = {
        {"AA", Eigen::Vector2d(1, 0)}, {"AE", Eigen::Vector2d(0, 1)}};
    REQUIRE(contrast_from_embeddings(items) == 0.0);
  }
  SECTION("identical embeddings contribute nothing") {
    Eigen::Vector2d e(0.3, 0.7);
    std::vector<std::pair<std::string, Eigen::VectorXd>> items = {{"AA", e},
                                                                  {"AA", e}};
    REQUIRE(contrast_from_embeddings(items) == 0.0);
  }
  SECTION("unit basis vectors give sqrt(2)") {
    std::vector<std::pair<std::string, Eigen::VectorXd>> items = {
        {"AA", Eigen::Vector2d(1, 0)}, {"AA", Eigen::Vector2d(0, 1)}};
    REQUIRE(contrast_from_embeddings(items) ==
            Catch::Approx(std::sqrt(2.0)).epsilon(1e-12));
  }

  SECTION("end-to-end: all-distinct phones and identical same-phone segments") {
    PlcsdConfig cfg = mini_config();
    ModelParams params = init_plcsd_params(cfg, 5, 4);
    Eigen::MatrixXf m = Eigen::MatrixXf::Random(5, 2);
    std::vector<PhoneSegment> distinct = {make_segment("u", 0, "P00", m),
                                          make_segment("u", 1, "P01", m),
                                          make_segment("u", 2, "P02", m)};
    REQUIRE(contrast_loss(as_batch(distinct), params) == 0.0);

    std::vector<PhoneSegment> same = {make_segment("u", 0, "P00", m),
                                      make_segment("u", 1, "P00", m)};
    REQUIRE(contrast_loss(as_batch(same), params) ==
            Catch::Approx(0.0).margin(1e-12));
  }

  SECTION("permutation invariance is exact") {
    PlcsdConfig cfg = mini_config();
    auto corpus = make_synthetic_corpus(mini_synth(), 10, 7);
    ModelParams params = init_plcsd_params(cfg, 5, 4);
    SegmentBatch batch = as_batch(corpus.segments);
    double v1 = contrast_loss(batch, params);
    SegmentBatch permuted;
    for (std::size_t i = batch.size(); i-- > 0;) permuted.push_back(batch[i]);
    std::swap(permuted[0], permuted[permuted.size() / 2]);
    double v2 = contrast_loss(permuted, params);
    REQUIRE(v1 == v2);
    REQUIRE(v1 >= 0.0);
  }
}

TEST_CASE("style uniformity loss oracle values") {
  SECTION("uniform posterior scores zero") {
    Eigen::VectorXd uniform = Eigen::VectorXd::Constant(4, 0.25);
    REQUIRE(uniform_deviation_from_posterior(uniform) == 0.0);
  }
  SECTION("binary one-hot gives 1.0") {
    Eigen::VectorXd p(2);
    p << 1.0, 0.0;
    REQUIRE(uniform_deviation_from_posterior(p) ==
            Catch::Approx(1.0).epsilon(1e-12));
  }
  SECTION("four-way slightly peaked gives 0.3") {
    Eigen::VectorXd p(4);
    p << 0.4, 0.2, 0.2, 0.2;
    REQUIRE(uniform_deviation_from_posterior(p) ==
            Catch::Approx(0.3).epsilon(1e-12));
  }
  SECTION("zero iff uniform, both directions") {
    Eigen::VectorXd almost = Eigen::VectorXd::Constant(5, 0.2);
    almost(0) += 1e-3;
    almost(1) -= 1e-3;
    REQUIRE(uniform_deviation_from_posterior(almost) > 0.0);
  }
}

TEST_CASE("segment adversarial loss oracle values") {
  double eps = 1e-7;
  SECTION("perfect discrimination approaches zero") {
    REQUIRE(discriminator_bce(1.0 - eps, eps) ==
            Catch::Approx(-2.0 * std::log(1.0 - eps)).epsilon(1e-6));
    REQUIRE(discriminator_bce(1.0 - eps, eps) < 1e-5);
  }
  SECTION("maximally confused discriminator at 0.5") {
    REQUIRE(discriminator_bce(0.5, 0.5) ==
            Catch::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
  }
  SECTION("generator values") {
    REQUIRE(generator_bce(1.0 - eps) < 1e-6);
    REQUIRE(generator_bce(0.5) == Catch::Approx(std::log(2.0)).epsilon(1e-12));
    double big = generator_bce(eps);
    REQUIRE(big > 10.0);
    REQUIRE(std::isfinite(big));
  }
  SECTION("additivity over the batch") {
    PlcsdConfig cfg = mini_config();
    auto corpus = make_synthetic_corpus(mini_synth(), 4, 9);
    ModelParams params = init_plcsd_params(cfg, 5, 4);
    SegmentBatch batch = as_batch(corpus.segments);
    double whole = seg_adv_dis_loss(batch, params, cfg);
    double parts = 0.0;
    for (const PhoneSegment* seg : batch)
      parts += seg_adv_dis_loss({seg}, params, cfg);
    REQUIRE(whole == Catch::Approx(parts).epsilon(1e-9));
  }
}

TEST_CASE("loss non-negativity on random models") {
  PlcsdConfig cfg = mini_config();
  auto corpus = make_synthetic_corpus(mini_synth(), 12, 31);
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    PlcsdConfig c = cfg;
    c.seed = seed;
    ModelParams params = init_plcsd_params(c, 5, 4);
    SegmentBatch batch = as_batch(corpus.segments);
    REQUIRE(auto_loss(batch, params, c) >= 0.0);
    REQUIRE(content_class_loss(batch, params, corpus.inventory, c) >= 0.0);
    REQUIRE(contrast_loss(batch, params) >= 0.0);
    REQUIRE(style_adv_dis_loss(batch, params, corpus.inventory, c) >= 0.0);
    REQUIRE(style_adv_gen_loss(batch, params, corpus.inventory) >= 0.0);
    REQUIRE(seg_adv_dis_loss(batch, params, c) >= 0.0);
    REQUIRE(seg_adv_gen_loss(batch, params, c) >= 0.0);
  }
}

TEST_CASE("train_step protocol") {
  PlcsdConfig cfg = mini_config();
  auto corpus = make_synthetic_corpus(mini_synth(), 16, 41);
  PlcsdTrainer trainer(cfg, corpus.inventory, 5);
  SegmentBatch batch = as_batch(corpus.segments);

  SECTION("frozen groups are bitwise unchanged per sub-step") {
    // snapshot all groups before each sub-step; after it, only the updated
    // groups may have changed
    std::map<std::string, std::vector<unsigned char>> before;
    for (const auto& [name, group] : trainer.params().groups)
      before[name] = group.value_bytes();

    std::vector<int> seen_order;
    auto observer = [&](int index, const ModelParams& params,
                        const SubStepReport& sub) {
      seen_order.push_back(index);
      for (const auto& [name, group] : params.groups) {
        bool updated = false;
        for (const auto& g : sub.updated_groups) updated |= (g == name);
        if (!updated) {
          REQUIRE(group.value_bytes() == before[name]);
        }
      }
      // refresh snapshots for the next sub-step
      for (const auto& [name, group] : params.groups)
        before[name] = group.value_bytes();
    };
    StepReport report = trainer.train_step(batch, observer);
    REQUIRE(seen_order == std::vector<int>{1, 2, 3, 4, 5, 6});
    REQUIRE(report.substeps.size() == 6);
  }

  SECTION("step report names exactly the seven losses") {
    StepReport report = trainer.train_step(batch);
    auto losses = report.losses();
    REQUIRE(losses.size() == 7);
    REQUIRE(losses.count("L_auto") == 1);
    REQUIRE(losses.count("L_c") == 1);
    REQUIRE(losses.count("L_contra") == 1);
    REQUIRE(losses.count("L_s_dis") == 1);
    REQUIRE(losses.count("L_s_gen") == 1);
    REQUIRE(losses.count("L_seg_dis") == 1);
    REQUIRE(losses.count("L_seg_gen") == 1);
    REQUIRE(report.all_finite());
  }

  SECTION("posteriors remain valid after training steps") {
    for (int i = 0; i < 3; ++i) trainer.train_step(batch);
    for (const PhoneSegment& seg : corpus.segments) {
      classify_content_phone(encode_content(seg, trainer.params()),
                             trainer.params())
          .validate();
      classify_style_phone(encode_style(seg, trainer.params()),
                           trainer.params())
          .validate();
    }
  }

  SECTION("empty batch is an error") {
    REQUIRE_THROWS_AS(trainer.train_step({}), validation_error);
  }
}

TEST_CASE("train loop determinism and smoke descent") {
  PlcsdConfig cfg = mini_config();
  cfg.max_epochs = 3;
  cfg.batch_size = 8;
  auto corpus = make_synthetic_corpus(mini_synth(), 32, 51);

  SECTION("identical seeds give bitwise-identical parameters") {
    PlcsdTrainer a(cfg, corpus.inventory, 5);
    PlcsdTrainer b(cfg, corpus.inventory, 5);
    plcsd_train(a, corpus.segments);
    plcsd_train(b, corpus.segments);
    for (const auto& [name, group] : a.params().groups)
      REQUIRE(group.value_bytes() == b.params().groups.at(name).value_bytes());
  }

  SECTION("auto loss decreases over a short run") {
    PlcsdTrainer trainer(cfg, corpus.inventory, 5);
    PlcsdTrainResult result = plcsd_train(trainer, corpus.segments);
    REQUIRE(result.epochs_run >= 2);
    REQUIRE(result.epochs.back().train_auto_per_segment <
            result.epochs.front().train_auto_per_segment);
  }

  SECTION("empty segment list errors before any step") {
    PlcsdTrainer trainer(cfg, corpus.inventory, 5);
    REQUIRE_THROWS_AS(plcsd_train(trainer, {}), validation_error);
  }
}

// Central finite differences over every parameter of the groups a loss
// trains, on a miniature model: all dims <= 8, N_w = 4, batch 4, segments
// <= 3 frames.
namespace {

struct GradCheckCase {
  std::string name;
  std::function<Var(Tape&, Binder&, ModelParams&, const SegmentBatch&)> build;
  std::vector<std::string> groups;
};

void run_gradcheck(const GradCheckCase& c, ModelParams& params,
                   const SegmentBatch& batch) {
  const double h = 1e-3;
  const double tol = 1e-4;
  // analytic
  for (auto& [name, group] : params.groups) group.zero_grads();
  {
    Tape tape;
    Binder binder(tape);
    Var loss = c.build(tape, binder, params, batch);
    tape.backward(loss);
    binder.scatter_grads();
  }
  for (const std::string& gname : c.groups) {
    ParamGroup& group = params.group(gname);
    for (ParamTensor& tensor : group.tensors) {
      Mat analytic = tensor.grad;
      Mat fd(tensor.value.rows(), tensor.value.cols());
      for (long j = 0; j < tensor.value.cols(); ++j) {
        for (long i = 0; i < tensor.value.rows(); ++i) {
          double orig = tensor.value(i, j);
          tensor.value(i, j) = orig + h;
          double vp;
          {
            Tape tape(false);
            Binder binder(tape);
            vp = tape.scalar_value(c.build(tape, binder, params, batch));
          }
          tensor.value(i, j) = orig - h;
          double vm;
          {
            Tape tape(false);
            Binder binder(tape);
            vm = tape.scalar_value(c.build(tape, binder, params, batch));
          }
          tensor.value(i, j) = orig;
          fd(i, j) = (vp - vm) / (2.0 * h);
        }
      }
      double denom = std::max(analytic.norm(), fd.norm());
      double rel = denom < 1e-12 ? 0.0 : (analytic - fd).norm() / denom;
      INFO(c.name << " " << gname << "/" << tensor.name << " rel=" << rel);
      REQUIRE(rel < tol);
    }
  }
}

}  // namespace

TEST_CASE("gradient checks for all seven losses") {
  PlcsdConfig cfg = mini_config();
  SyntheticConfig scfg = mini_synth();
  auto corpus = make_synthetic_corpus(scfg, 4, 77);
  // ensure at least one same-phone pair for the contrast loss
  corpus.segments[1].phone = corpus.segments[0].phone;
  ModelParams params = init_plcsd_params(cfg, scfg.n_mels, scfg.n_phones);
  SegmentBatch batch = as_batch(corpus.segments);
  const PhoneInventory& inv = corpus.inventory;
  using namespace plcsd_groups;

  std::vector<GradCheckCase> cases = {
      {"auto",
       [&](Tape& t, Binder& b, ModelParams& p, const SegmentBatch& batch_) {
         return build_auto_loss(t, b, p, batch_, cfg, true, true);
       },
       {content_encoder, style_encoder, decoder}},
      {"content_class",
       [&](Tape& t, Binder& b, ModelParams& p, const SegmentBatch& batch_) {
         return build_content_class_loss(t, b, p, batch_, inv, cfg, true, true);
       },
       {content_encoder, content_classifier}},
      {"contrast",
       [&](Tape& t, Binder& b, ModelParams& p, const SegmentBatch& batch_) {
         return build_contrast_loss(t, b, p, batch_, true);
       },
       {content_encoder}},
      {"style_dis",
       [&](Tape& t, Binder& b, ModelParams& p, const SegmentBatch& batch_) {
         return build_style_class_loss(t, b, p, batch_, inv, cfg, false, true);
       },
       {style_classifier}},
      {"style_gen",
       [&](Tape& t, Binder& b, ModelParams& p, const SegmentBatch& batch_) {
         return build_style_gen_loss(t, b, p, batch_, inv, true);
       },
       {style_encoder}},
      {"seg_dis",
       [&](Tape& t, Binder& b, ModelParams& p, const SegmentBatch& batch_) {
         return build_seg_dis_loss(t, b, p, batch_, cfg, true);
       },
       {segment_discriminator}},
      {"seg_gen",
       [&](Tape& t, Binder& b, ModelParams& p, const SegmentBatch& batch_) {
         return build_seg_gen_loss(t, b, p, batch_, cfg, true);
       },
       {content_encoder, style_encoder, decoder}},
  };

  for (const auto& c : cases) run_gradcheck(c, params, batch);
}

TEST_CASE("frozen paths receive no gradient") {
  PlcsdConfig cfg = mini_config();
  SyntheticConfig scfg = mini_synth();
  auto corpus = make_synthetic_corpus(scfg, 4, 78);
  ModelParams params = init_plcsd_params(cfg, scfg.n_mels, scfg.n_phones);
  SegmentBatch batch = as_batch(corpus.segments);

  // style discrimination: no gradient into the style encoder
  for (auto& [n, g] : params.groups) g.zero_grads();
  {
    Tape tape;
    Binder binder(tape);
    Var loss = build_style_class_loss(tape, binder, params, batch,
                                      corpus.inventory, cfg, false, true);
    tape.backward(loss);
    binder.scatter_grads();
  }
  for (const auto& t : params.group(plcsd_groups::style_encoder).tensors)
    REQUIRE(t.grad.norm() == 0.0);
  double clf_norm = 0.0;
  for (const auto& t : params.group(plcsd_groups::style_classifier).tensors)
    clf_norm += t.grad.norm();
  REQUIRE(clf_norm > 0.0);

  // style generation: no gradient into the style classifier
  for (auto& [n, g] : params.groups) g.zero_grads();
  {
    Tape tape;
    Binder binder(tape);
    Var loss = build_style_gen_loss(tape, binder, params, batch,
                                    corpus.inventory, true);
    tape.backward(loss);
    binder.scatter_grads();
  }
  for (const auto& t : params.group(plcsd_groups::style_classifier).tensors)
    REQUIRE(t.grad.norm() == 0.0);
  double enc_norm = 0.0;
  for (const auto& t : params.group(plcsd_groups::style_encoder).tensors)
    enc_norm += t.grad.norm();
  REQUIRE(enc_norm > 0.0);
}
