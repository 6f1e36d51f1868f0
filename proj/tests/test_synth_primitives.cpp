// Style-sequence interpolation and the Griffin-Lim vocoder.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "csd/corpus/mel.hpp"
#include "csd/synth/interpolate.hpp"
#include "csd/synth/vocoder.hpp"

using namespace csd;

namespace {

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST_CASE("interpolation suite") {
  SECTION("same target length is the identity") {
    StyleSequence seq = {vec2(1, 2), vec2(3, 4), vec2(5, 6)};
    StyleSequence out = interpolate_style_sequence(seq, 3);
    REQUIRE(out.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) REQUIRE(out[i] == seq[i]);
  }

  SECTION("two points to three inserts the midpoint") {
    Eigen::VectorXd a = vec2(0, 2), b = vec2(4, -2);
    StyleSequence out = interpolate_style_sequence({a, b}, 3);
    REQUIRE(out.size() == 3);
    REQUIRE(out[0] == a);
    REQUIRE(out[1] == ((a + b) / 2.0).eval());
    REQUIRE(out[2] == b);
  }

  SECTION("single element replicates") {
    Eigen::VectorXd a = vec2(7, 8);
    StyleSequence out = interpolate_style_sequence({a}, 4);
    REQUIRE(out.size() == 4);
    for (const auto& v : out) REQUIRE(v == a);
  }

  SECTION("target one picks the floor-middle element") {
    StyleSequence seq = {vec2(1, 1), vec2(2, 2), vec2(3, 3), vec2(4, 4)};
    StyleSequence out = interpolate_style_sequence(seq, 1);
    REQUIRE(out.size() == 1);
    REQUIRE(out[0] == seq[1]);  // (L-1)/2 = 1 for L = 4
  }

  SECTION("endpoints are preserved exactly for all shapes") {
    Rng rng(17);
    for (int trial = 0; trial < 50; ++trial) {
      long L = 2 + static_cast<long>(rng.uniform_index(9));
      long T = 2 + static_cast<long>(rng.uniform_index(15));
      StyleSequence seq;
      for (long i = 0; i < L; ++i)
        seq.push_back(vec2(rng.normal(), rng.normal()));
      StyleSequence out = interpolate_style_sequence(seq, T);
      REQUIRE(out.size() == static_cast<std::size_t>(T));
      REQUIRE(out.front() == seq.front());
      REQUIRE(out.back() == seq.back());
    }
  }

  SECTION("outputs are convex combinations of adjacent inputs") {
    Rng rng(19);
    // collinear input: v_i = base + i * step; outputs must stay on the line
    Eigen::VectorXd base = vec2(1.0, -2.0), step = vec2(0.5, 0.25);
    StyleSequence seq;
    for (long i = 0; i < 5; ++i) seq.push_back(base + static_cast<double>(i) * step);
    for (long T : {2L, 3L, 7L, 11L}) {
      StyleSequence out = interpolate_style_sequence(seq, T);
      for (const auto& v : out) {
        // project onto the line and check the residual vanishes
        double alpha = (v - base).dot(step) / step.squaredNorm();
        Eigen::VectorXd on_line = base + alpha * step;
        REQUIRE((v - on_line).norm() < 1e-12);
        REQUIRE(alpha >= -1e-12);
        REQUIRE(alpha <= 4.0 + 1e-12);
      }
    }
  }

  SECTION("empty input is an error") {
    REQUIRE_THROWS_AS(interpolate_style_sequence({}, 3), validation_error);
  }
}

TEST_CASE("griffin-lim vocoder") {
  MelConfig mcfg;
  mcfg.n_mels = 40;
  VocoderConfig vcfg;
  vcfg.griffin_lim_iters = 8;

  SECTION("silence-floor mel produces a near-zero waveform") {
    MelSpectrogram mel;
    mel.data.setConstant(40, 12, static_cast<float>(std::log(mcfg.log_floor)));
    mel.frame_shift = 256.0 / 22050.0;
    auto audio = vocode(mel, mcfg, vcfg);
    double peak = 0.0;
    for (double s : audio) peak = std::max(peak, std::abs(s));
    REQUIRE(peak < 1e-3);
  }

  SECTION("sample count equals frames * hop") {
    MelSpectrogram mel;
    mel.data.setConstant(40, 9, -2.0f);
    mel.frame_shift = 256.0 / 22050.0;
    auto audio = vocode(mel, mcfg, vcfg);
    REQUIRE(std::llabs(static_cast<long long>(audio.size()) - 9LL * 256LL) <=
            256LL);
  }

  SECTION("fixed input and iteration count is bitwise deterministic") {
    Rng rng(23);
    MelSpectrogram mel;
    mel.data.resize(40, 6);
    for (long j = 0; j < 6; ++j)
      for (long i = 0; i < 40; ++i)
        mel.data(i, j) = static_cast<float>(-4.0 + rng.normal());
    auto a = vocode(mel, mcfg, vcfg);
    auto b = vocode(mel, mcfg, vcfg);
    REQUIRE(a == b);
  }

  SECTION("round trip through a real tone is tonally consistent") {
    // analyse a sine, vocode it back, and check the dominant pitch survives
    const double pi = 3.14159265358979323846;
    std::vector<double> tone(22050);
    for (std::size_t i = 0; i < tone.size(); ++i)
      tone[i] = 0.5 * std::sin(2.0 * pi * 330.0 * static_cast<double>(i) / 22050.0);
    MelSpectrogram mel = compute_mel(tone, 22050.0, mcfg);
    VocoderConfig more;
    more.griffin_lim_iters = 30;
    auto rebuilt = vocode(mel, mcfg, more);
    REQUIRE(rebuilt.size() > 4096);
    // count zero crossings as a cheap frequency probe
    long crossings = 0;
    for (std::size_t i = 1; i < rebuilt.size(); ++i)
      if ((rebuilt[i - 1] < 0.0) != (rebuilt[i] < 0.0)) ++crossings;
    double est_freq = static_cast<double>(crossings) /
                      (2.0 * static_cast<double>(rebuilt.size()) / 22050.0);
    REQUIRE(est_freq > 280.0);
    REQUIRE(est_freq < 380.0);
  }

  SECTION("empty mel is an error") {
    MelSpectrogram mel;
    mel.data.resize(40, 0);
    REQUIRE_THROWS_AS(vocode(mel, mcfg, vcfg), validation_error);
  }
}
