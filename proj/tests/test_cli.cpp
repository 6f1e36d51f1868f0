// Pipeline command integration: stage ordering, cache idempotence, artifact
// provenance, checkpoint round-trips, and a miniature end-to-end run.

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "csd/checkpoint.hpp"
#include "csd/cli/commands.hpp"
#include "csd/cli/config.hpp"

using namespace csd;
namespace fs = std::filesystem;

namespace {

struct TempRun {
  fs::path root;

  TempRun() {
    root = fs::temp_directory_path() /
           ("csd_cli_" + std::to_string(Rng(std::random_device{}()).next_u64()));
    fs::create_directories(root);
  }
  ~TempRun() {
    std::error_code ec;
    fs::remove_all(root, ec);
  }
};

RunConfig tiny_run_config(const fs::path& root) {
  RunConfig cfg;
  cfg.seed = 7;
  cfg.output_dir = (root / "run").string();
  cfg.inventory.kind = "synthetic";
  cfg.inventory.n_phones = 4;
  cfg.corpus.manifest = (root / "corpus" / "manifest.json").string();
  cfg.corpus.train_fraction = 0.8;

  cfg.synthetic.generator.n_phones = 4;
  cfg.synthetic.generator.n_styles = 2;
  cfg.synthetic.generator.n_mels = 8;
  cfg.synthetic.n_utterances = 10;
  cfg.synthetic.phones_per_utterance = 4;
  cfg.synthetic.frames_per_segment = 6;
  cfg.synthetic.seed = 3;

  cfg.mel.n_mels = 8;  // matches the synthetic corpus

  cfg.plcsd.d_c = 5;
  cfg.plcsd.d_s = 5;
  cfg.plcsd.encoder_width = 8;
  cfg.plcsd.decoder_width = 8;
  cfg.plcsd.classifier_hidden = 6;
  cfg.plcsd.discriminator_width = 6;
  cfg.plcsd.batch_size = 8;
  cfg.plcsd.max_epochs = 2;
  cfg.plcsd.seed = 7;

  cfg.acoustic.d_t = 6;
  cfg.acoustic.d_s = 5;
  cfg.acoustic.decoder_width = 12;
  cfg.acoustic.attention_dim = 8;
  cfg.acoustic.location_channels = 4;
  cfg.acoustic.location_kernel = 3;
  cfg.acoustic.max_epochs = 2;
  cfg.acoustic.max_decode_frames = 60;
  cfg.acoustic.seed = 7;

  cfg.predictor.d_t = 6;
  cfg.predictor.d_s = 5;
  cfg.predictor.blocks = 1;
  cfg.predictor.model_dim = 8;
  cfg.predictor.ff_dim = 12;
  cfg.predictor.max_epochs = 2;
  cfg.predictor.seed = 7;
  return cfg;
}

}  // namespace

TEST_CASE("config file round trip") {
  TempRun tmp;
  RunConfig cfg = tiny_run_config(tmp.root);
  fs::path p = tmp.root / "config.json";
  {
    std::ofstream out(p);
    out << run_config_to_json(cfg).dump(2);
  }
  RunConfig back = load_run_config(p.string());
  REQUIRE(run_config_to_json(back) == run_config_to_json(cfg));
  REQUIRE(config_hash(back) == config_hash(cfg));
}

TEST_CASE("pipeline stages in order") {
  TempRun tmp;
  RunConfig cfg = tiny_run_config(tmp.root);
  std::ostringstream log;

  SECTION("stages refuse to run without their predecessors") {
    REQUIRE_THROWS_AS(cmd_train_plcsd(cfg, "", log), prerequisite_error);
    REQUIRE_THROWS_AS(cmd_train_utterance(cfg, log), prerequisite_error);
    REQUIRE_THROWS_AS(cmd_train_predictor(cfg, log), prerequisite_error);
    REQUIRE_THROWS_AS(cmd_export_embeddings(cfg, "x.tsv", true, log),
                      prerequisite_error);
  }

  cmd_make_synthetic(cfg, (tmp.root / "corpus").string(), log);
  REQUIRE(fs::exists(tmp.root / "corpus" / "manifest.json"));
  REQUIRE(fs::exists(tmp.root / "corpus" / "hidden_styles.json"));

  nlohmann::json prep = cmd_prepare(cfg, log);
  REQUIRE(prep.at("counts").at("prepared").get<int>() == 10);
  REQUIRE(prep.at("split").at("train").size() == 8);
  REQUIRE(prep.at("split").at("test").size() == 2);
  REQUIRE(prep.at("config_hash").get<std::string>() == config_hash(cfg));

  SECTION("prepare is idempotent via the config hash") {
    std::ostringstream second;
    cmd_prepare(cfg, second);
    REQUIRE(second.str().find("cache hit") != std::string::npos);
  }

  SECTION("missing audio names the utterance id") {
    // corrupt one manifest entry to point at a missing mel
    nlohmann::json manifest;
    {
      std::ifstream in(cfg.corpus.manifest);
      in >> manifest;
    }
    manifest[0]["mel"] = "mels/definitely-missing.mel";
    {
      std::ofstream out(cfg.corpus.manifest);
      out << manifest.dump(2);
    }
    RunConfig cfg2 = cfg;
    cfg2.output_dir = (tmp.root / "run2").string();
    cfg2.seed = 8;  // different hash so the cache does not shadow the error
    try {
      cmd_prepare(cfg2, log);
      FAIL("expected io_error");
    } catch (const io_error& e) {
      REQUIRE(std::string(e.what()).find("synutt-0") != std::string::npos);
    }
  }

  nlohmann::json plcsd_report = cmd_train_plcsd(cfg, "", log);
  REQUIRE(plcsd_report.at("epochs_run").get<long>() >= 1);
  REQUIRE(fs::exists(fs::path(cfg.output_dir) / "checkpoints" /
                     "plcsd_last.ckpt"));

  SECTION("training log lines carry all seven losses and sub-step norms") {
    std::ifstream in(fs::path(cfg.output_dir) / "logs" /
                     "plcsd_train_log.jsonl");
    std::string line;
    REQUIRE(std::getline(in, line));
    nlohmann::json step = nlohmann::json::parse(line);
    for (const char* name : {"L_auto", "L_c", "L_contra", "L_s_dis", "L_s_gen",
                             "L_seg_dis", "L_seg_gen"})
      REQUIRE(step.contains(name));
    REQUIRE(step.at("substeps").size() == 6);
    for (const auto& sub : step.at("substeps"))
      REQUIRE(sub.contains("grad_norm"));
  }

  SECTION("resume from checkpoint reproduces the same losses") {
    Checkpoint ckpt = load_checkpoint(
        (fs::path(cfg.output_dir) / "checkpoints" / "plcsd_last.ckpt").string());
    PreparedCorpus corpus = load_prepared(cfg);
    std::vector<PhoneSegment> segments;
    for (const Utterance& u : corpus.train)
      for (PhoneSegment& s : segment_utterance(u, cfg.silence))
        segments.push_back(std::move(s));
    SegmentBatch batch;
    for (std::size_t i = 0; i < 8; ++i) batch.push_back(&segments[i]);

    PlcsdTrainer a(cfg.plcsd, corpus.inventory, 8);
    a.set_params(ckpt.params);
    PlcsdTrainer b(cfg.plcsd, corpus.inventory, 8);
    b.set_params(ckpt.params);
    StepReport ra = a.train_step(batch);
    StepReport rb = b.train_step(batch);
    REQUIRE(ra.losses() == rb.losses());
  }

  nlohmann::json utt_report = cmd_train_utterance(cfg, log);
  REQUIRE(utt_report.at("skipped_utterances").get<long>() == 0);
  REQUIRE(fs::exists(fs::path(cfg.output_dir) / "checkpoints" /
                     "acoustic_last.ckpt"));

  nlohmann::json pred_report = cmd_train_predictor(cfg, log);
  REQUIRE(fs::exists(fs::path(cfg.output_dir) / "checkpoints" /
                     "predictor_last.ckpt"));

  // generation: tts works without a reference, transfer demands one
  nlohmann::json prep_json = prep;
  std::string test_id = prep_json.at("split").at("test")[0].get<std::string>();

  nlohmann::json recon = cmd_generate(cfg, "reconstruct", test_id, "", "", log);
  REQUIRE(recon.at("mode") == "reconstruct");
  REQUIRE(recon.at("checkpoints").at("plcsd").get<std::string>().size() == 16);
  REQUIRE(fs::exists(recon.at("mel").get<std::string>()));

  fs::path phones_file = tmp.root / "phones.txt";
  {
    std::ofstream out(phones_file);
    out << "P00 P01 P02\n";
  }
  nlohmann::json tts = cmd_generate(cfg, "tts", "", phones_file.string(), "", log);
  REQUIRE(tts.at("mode") == "tts");
  REQUIRE(tts.at("reference_id") == "");

  REQUIRE_THROWS_AS(
      cmd_generate(cfg, "transfer", "", phones_file.string(), "", log),
      validation_error);
  nlohmann::json tr =
      cmd_generate(cfg, "transfer", "", phones_file.string(), test_id, log);
  REQUIRE(tr.at("reference_id") == test_id);

  SECTION("evaluate on identical mel files is all zero") {
    std::string mel_path = recon.at("mel").get<std::string>();
    nlohmann::json report = cmd_evaluate(cfg, mel_path, mel_path, "", log);
    REQUIRE(report.at("mcd").get<double>() == 0.0);
  }

  SECTION("export embeddings round trip") {
    fs::path tsv = tmp.root / "emb.tsv";
    nlohmann::json exp = cmd_export_embeddings(cfg, tsv.string(), true, log);
    auto rows = load_embedding_tsv(tsv.string());
    REQUIRE(rows.size() == exp.at("rows").get<std::size_t>());
    // 2 rows per segment: 2 test utterances x 4 phones x 2 kinds
    REQUIRE(rows.size() == 16);
    REQUIRE(rows[0].kind == "content");
    REQUIRE(rows[1].kind == "style");
    REQUIRE(rows[0].values.size() == 5);
  }

  SECTION("asr manifest accumulates generation lines") {
    std::ifstream in(fs::path(cfg.output_dir) / "out" / "asr_manifest.jsonl");
    std::string line;
    int lines = 0;
    while (std::getline(in, line)) {
      nlohmann::json j = nlohmann::json::parse(line);
      REQUIRE(j.contains("transcript"));
      ++lines;
    }
    REQUIRE(lines >= 3);
  }
}

TEST_CASE("checkpoint round trip is byte-stable") {
  TempRun tmp;
  RunConfig cfg = tiny_run_config(tmp.root);
  ModelParams params = init_plcsd_params(cfg.plcsd, 8, 4);
  Checkpoint ckpt =
      make_component_checkpoint(cfg, "plcsd", 3, params, {{"n_mels", 8}});

  fs::path p1 = tmp.root / "a.ckpt";
  fs::path p2 = tmp.root / "b.ckpt";
  save_checkpoint(p1.string(), ckpt);
  Checkpoint back = load_checkpoint(p1.string());
  REQUIRE(back.component == "plcsd");
  REQUIRE(back.epoch == 3);
  REQUIRE(back.extra.at("n_mels").get<long>() == 8);
  REQUIRE(back.config.at("config_hash").get<std::string>() == config_hash(cfg));

  // file -> memory -> file reproduces identical bytes
  save_checkpoint(p2.string(), back);
  std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
  std::string b1((std::istreambuf_iterator<char>(f1)),
                 std::istreambuf_iterator<char>());
  std::string b2((std::istreambuf_iterator<char>(f2)),
                 std::istreambuf_iterator<char>());
  REQUIRE(b1 == b2);

  // group/tensor shapes and values survive at f32 precision
  for (const auto& [name, group] : ckpt.params.groups) {
    const ParamGroup& bg = back.params.group(name);
    REQUIRE(bg.tensors.size() == group.tensors.size());
    for (std::size_t i = 0; i < group.tensors.size(); ++i) {
      const Mat& orig = group.tensors[i].value;
      const Mat& got = bg.tensors[i].value;
      REQUIRE(got.rows() == orig.rows());
      REQUIRE(got.cols() == orig.cols());
      for (long c = 0; c < orig.cols(); ++c)
        for (long r = 0; r < orig.rows(); ++r)
          REQUIRE(got(r, c) == static_cast<double>(static_cast<float>(orig(r, c))));
    }
  }
}

TEST_CASE("deterministic pipeline re-run reproduces byte-identical mels") {
  TempRun tmp;
  std::ostringstream log;

  auto run_once = [&](const std::string& name) {
    RunConfig cfg = tiny_run_config(tmp.root);
    cfg.output_dir = (tmp.root / name).string();
    if (!fs::exists(tmp.root / "corpus"))
      cmd_make_synthetic(cfg, (tmp.root / "corpus").string(), log);
    cmd_prepare(cfg, log);
    cmd_train_plcsd(cfg, "", log);
    cmd_train_utterance(cfg, log);
    nlohmann::json prep =
        clidetail::read_json(fs::path(cfg.output_dir) / "prepared" /
                             "prepared.json");
    std::string test_id = prep.at("split").at("test")[0].get<std::string>();
    nlohmann::json recon =
        cmd_generate(cfg, "reconstruct", test_id, "", "", log);
    return recon.at("mel").get<std::string>();
  };

  std::string mel_a = run_once("run_a");
  std::string mel_b = run_once("run_b");
  std::ifstream f1(mel_a, std::ios::binary), f2(mel_b, std::ios::binary);
  std::string b1((std::istreambuf_iterator<char>(f1)),
                 std::istreambuf_iterator<char>());
  std::string b2((std::istreambuf_iterator<char>(f2)),
                 std::istreambuf_iterator<char>());
  REQUIRE(b1.size() > 0);
  REQUIRE(b1 == b2);
}
