#pragma once

// Pipeline commands behind the CLI subcommands. Each stage writes its
// artifacts under the run's output directory and refuses to run without its
// predecessor's outputs (prerequisite_error -> exit code 4).
//
//   prepare          corpus manifest -> mel cache + segment cache + splits
//   make-synthetic   generated corpus written in the same layout
//   train-plcsd      segment-level training -> plcsd checkpoints + log
//   train-utterance  utterance-level training -> acoustic checkpoint
//   train-predictor  predictor pairs -> predictor checkpoint
//   generate         reconstruct / transfer / tts -> wav + mel + sidecar
//   evaluate         reference/synthesized pair -> metric report JSON
//   export-embeddings  segments -> TSV for external visualization

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "csd/acoustic/train.hpp"
#include "csd/checkpoint.hpp"
#include "csd/cli/config.hpp"
#include "csd/corpus/alignment.hpp"
#include "csd/corpus/manifest.hpp"
#include "csd/corpus/mel.hpp"
#include "csd/corpus/melio.hpp"
#include "csd/corpus/segment.hpp"
#include "csd/corpus/synthetic.hpp"
#include "csd/corpus/wav.hpp"
#include "csd/eval/embed_export.hpp"
#include "csd/eval/metrics.hpp"
#include "csd/plcsd/train.hpp"
#include "csd/synth/generate.hpp"
#include "csd/synth/vocoder.hpp"

namespace csd {

namespace fs = std::filesystem;

namespace clidetail {

inline fs::path out_dir(const RunConfig& cfg) { return fs::path(cfg.output_dir); }
inline fs::path prepared_dir(const RunConfig& cfg) {
  return out_dir(cfg) / "prepared";
}
inline fs::path ckpt_dir(const RunConfig& cfg) {
  return out_dir(cfg) / "checkpoints";
}
inline fs::path log_dir(const RunConfig& cfg) { return out_dir(cfg) / "logs"; }
inline fs::path gen_dir(const RunConfig& cfg) { return out_dir(cfg) / "out"; }

inline void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open " + path.string() + " for writing");
  out << j.dump(2) << "\n";
}

inline nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw validation_error(path.string() + ": " + e.what());
  }
  return j;
}

inline void require_file(const fs::path& path, const std::string& stage) {
  if (!fs::exists(path))
    throw prerequisite_error("missing " + path.string() + "; run '" + stage +
                             "' first");
}

}  // namespace clidetail

// ---- prepare ----

struct PreparedCorpus {
  PhoneInventory inventory;
  std::vector<Utterance> train;
  std::vector<Utterance> test;
};

// Ingests the manifest: loads or computes mels, validates alignments,
// segments every utterance, writes the cache + split lists. Idempotent: a
// matching config hash in prepared.json short-circuits.
inline nlohmann::json cmd_prepare(const RunConfig& cfg,
                                  std::ostream& log = std::cout) {
  using namespace clidetail;
  if (cfg.corpus.manifest.empty())
    throw validation_error("prepare: corpus.manifest is not set");
  fs::create_directories(prepared_dir(cfg) / "mels");
  fs::path marker = prepared_dir(cfg) / "prepared.json";
  std::string hash = config_hash(cfg);
  if (fs::exists(marker)) {
    nlohmann::json existing = read_json(marker);
    if (existing.value("config_hash", "") == hash) {
      log << "prepare: cache hit (config " << hash << "), skipping\n";
      return existing;
    }
  }

  std::vector<ManifestRecord> records = load_manifest(cfg.corpus.manifest);
  if (records.size() < 2)
    throw validation_error("prepare: manifest needs at least 2 utterances");
  PhoneInventory inventory = cfg.inventory.build();
  fs::path manifest_base = fs::path(cfg.corpus.manifest).parent_path();
  auto resolve = [&](const std::string& p) {
    fs::path fp(p);
    return fp.is_absolute() ? fp : manifest_base / fp;
  };

  nlohmann::json utts = nlohmann::json::array();
  nlohmann::json segments_cache = nlohmann::json::array();
  nlohmann::json rejects = nlohmann::json::array();
  std::vector<std::string> ids;
  for (const ManifestRecord& rec : records) {
    Utterance utt;
    utt.id = rec.id;
    utt.phone_sequence = rec.phones;
    for (const auto& p : rec.phones)
      if (!inventory.contains(p))
        throw validation_error("prepare: utterance " + rec.id +
                               ": phone '" + p + "' not in inventory");
    fs::path align_path = resolve(rec.alignment_path);
    if (!fs::exists(align_path))
      throw io_error("prepare: utterance " + rec.id +
                     ": missing alignment file " + align_path.string());
    utt.alignment = load_alignment(align_path.string());

    if (!rec.audio_path.empty()) {
      fs::path audio = resolve(rec.audio_path);
      if (!fs::exists(audio))
        throw io_error("prepare: utterance " + rec.id + ": missing audio file " +
                       audio.string());
      WavData wav = load_wav(audio.string());
      if (wav.sample_rate != cfg.mel.sample_rate)
        throw validation_error("prepare: utterance " + rec.id +
                               ": sample rate " +
                               std::to_string(wav.sample_rate) +
                               " != configured " +
                               std::to_string(cfg.mel.sample_rate));
      utt.audio_path = audio.string();
      utt.mel = compute_mel(wav.samples, wav.sample_rate, cfg.mel);
    } else {
      fs::path melp = resolve(rec.mel_path);
      if (!fs::exists(melp))
        throw io_error("prepare: utterance " + rec.id + ": missing mel file " +
                       melp.string());
      utt.mel = load_mel(melp.string());
    }

    std::vector<PhoneSegment> segs = segment_utterance(utt, cfg.silence);
    fs::path mel_out = prepared_dir(cfg) / "mels" / (rec.id + ".mel");
    save_mel(mel_out.string(), utt.mel);

    nlohmann::json ju;
    ju["id"] = rec.id;
    ju["mel"] = mel_out.string();
    ju["alignment"] = align_path.string();
    ju["audio"] = utt.audio_path;
    ju["phones"] = rec.phones;
    utts.push_back(ju);
    nlohmann::json jsegs = nlohmann::json::array();
    for (const auto& s : segs)
      jsegs.push_back({{"phone", s.phone},
                       {"first_frame", s.first_frame},
                       {"n_frames", s.n_frames()}});
    segments_cache.push_back({{"id", rec.id}, {"segments", jsegs}});
    ids.push_back(rec.id);
  }

  auto [train_ids, test_ids] =
      split_dataset(ids, cfg.corpus.train_fraction, cfg.corpus.split_seed);

  nlohmann::json result;
  result["stage"] = "prepare";
  result["config_hash"] = hash;
  result["config"] = run_config_to_json(cfg);
  result["utterances"] = utts;
  result["segments"] = segments_cache;
  result["split"] = {{"train", train_ids}, {"test", test_ids}};
  result["counts"] = {{"input", records.size()},
                      {"prepared", ids.size()},
                      {"rejected", rejects.size()}};
  result["rejected"] = rejects;
  write_json(marker, result);
  log << "prepare: " << ids.size() << " utterances, " << train_ids.size()
      << " train / " << test_ids.size() << " test\n";
  return result;
}

inline PreparedCorpus load_prepared(const RunConfig& cfg) {
  using namespace clidetail;
  fs::path marker = prepared_dir(cfg) / "prepared.json";
  require_file(marker, "prepare");
  nlohmann::json j = read_json(marker);
  PreparedCorpus out;
  out.inventory = cfg.inventory.build();
  std::map<std::string, Utterance> by_id;
  for (const auto& ju : j.at("utterances")) {
    Utterance utt;
    utt.id = ju.at("id").get<std::string>();
    utt.audio_path = ju.value("audio", "");
    utt.phone_sequence = ju.at("phones").get<std::vector<std::string>>();
    utt.mel = load_mel(ju.at("mel").get<std::string>());
    utt.alignment = load_alignment(ju.at("alignment").get<std::string>());
    by_id[utt.id] = std::move(utt);
  }
  for (const auto& id : j.at("split").at("train"))
    out.train.push_back(by_id.at(id.get<std::string>()));
  for (const auto& id : j.at("split").at("test"))
    out.test.push_back(by_id.at(id.get<std::string>()));
  return out;
}

// ---- make-synthetic ----

// Writes a synthetic utterance corpus in the manifest layout that prepare
// ingests, plus the hidden style labels for evaluation.
inline nlohmann::json cmd_make_synthetic(const RunConfig& cfg,
                                         const std::string& dest,
                                         std::ostream& log = std::cout) {
  using namespace clidetail;
  fs::path root(dest);
  fs::create_directories(root / "mels");
  fs::create_directories(root / "alignments");
  SyntheticUtterances made = make_synthetic_utterances(
      cfg.synthetic.generator, cfg.synthetic.n_utterances,
      cfg.synthetic.phones_per_utterance, cfg.synthetic.frames_per_segment,
      cfg.synthetic.style_per_utterance, cfg.synthetic.seed);

  std::vector<ManifestRecord> records;
  nlohmann::json hidden = nlohmann::json::array();
  for (std::size_t u = 0; u < made.utterances.size(); ++u) {
    const Utterance& utt = made.utterances[u];
    fs::path melp = root / "mels" / (utt.id + ".mel");
    fs::path alignp = root / "alignments" / (utt.id + ".json");
    save_mel(melp.string(), utt.mel);
    save_alignment(alignp.string(), utt.id, utt.alignment);
    ManifestRecord rec;
    rec.id = utt.id;
    rec.mel_path = fs::relative(melp, root).string();
    rec.phones = utt.phone_sequence;
    rec.alignment_path = fs::relative(alignp, root).string();
    records.push_back(std::move(rec));
    hidden.push_back({{"id", utt.id}, {"styles", made.styles[u]}});
  }
  save_manifest((root / "manifest.json").string(), records);
  nlohmann::json meta;
  meta["stage"] = "make-synthetic";
  meta["config_hash"] = config_hash(cfg);
  meta["generator"] = to_json(cfg.synthetic.generator);
  meta["hidden_styles"] = hidden;
  write_json(root / "hidden_styles.json", meta);
  log << "make-synthetic: wrote " << records.size() << " utterances to "
      << root.string() << "\n";
  return meta;
}

// ---- training stages ----

inline Checkpoint make_component_checkpoint(const RunConfig& cfg,
                                            const std::string& component,
                                            long epoch, ModelParams params,
                                            nlohmann::json extra) {
  Checkpoint ckpt;
  ckpt.component = component;
  ckpt.epoch = epoch;
  ckpt.config = run_config_to_json(cfg);
  ckpt.config["config_hash"] = config_hash(cfg);
  ckpt.config["stage"] = component;
  ckpt.rng_state = Rng(cfg.seed).save_state();
  ckpt.extra = std::move(extra);
  ckpt.params = std::move(params);
  return ckpt;
}

inline nlohmann::json cmd_train_plcsd(const RunConfig& cfg,
                                      const std::string& resume_path = "",
                                      std::ostream& log = std::cout) {
  using namespace clidetail;
  PreparedCorpus corpus = load_prepared(cfg);
  fs::create_directories(ckpt_dir(cfg));
  fs::create_directories(log_dir(cfg));

  std::vector<PhoneSegment> segments;
  for (const Utterance& utt : corpus.train)
    for (PhoneSegment& s : segment_utterance(utt, cfg.silence))
      segments.push_back(std::move(s));
  if (segments.empty())
    throw validation_error("train-plcsd: no training segments");
  long n_mels = segments.front().mel.n_mels();

  PlcsdTrainer trainer(cfg.plcsd, corpus.inventory, n_mels);
  if (!resume_path.empty()) {
    Checkpoint ckpt = load_checkpoint(resume_path);
    if (ckpt.component != "plcsd")
      throw validation_error("train-plcsd: checkpoint component is '" +
                             ckpt.component + "'");
    trainer.set_params(ckpt.params);
  }

  std::ofstream train_log(log_dir(cfg) / "plcsd_train_log.jsonl",
                          std::ios::app);
  PlcsdTrainHooks hooks;
  long step_counter = 0;
  hooks.on_step = [&](const StepReport& report) {
    nlohmann::json j;
    j["step"] = step_counter++;
    for (const auto& [name, value] : report.losses()) j[name] = value;
    nlohmann::json subs = nlohmann::json::array();
    for (const auto& sub : report.substeps)
      subs.push_back({{"index", sub.index},
                      {"name", sub.name},
                      {"grad_norm", sub.grad_norm}});
    j["substeps"] = subs;
    train_log << j.dump() << "\n";
  };
  nlohmann::json extra;
  extra["n_mels"] = n_mels;
  extra["inventory"] = corpus.inventory.phones();
  hooks.on_checkpoint = [&](long epoch, const ModelParams& params, bool best) {
    Checkpoint ckpt =
        make_component_checkpoint(cfg, "plcsd", epoch, params, extra);
    save_checkpoint((ckpt_dir(cfg) / "plcsd_last.ckpt").string(), ckpt);
    if (best)
      save_checkpoint((ckpt_dir(cfg) / "plcsd_best.ckpt").string(), ckpt);
  };
  hooks.on_epoch = [&](const PlcsdEpochReport& er) {
    log << "train-plcsd: epoch " << er.epoch << " auto/segment "
        << er.train_auto_per_segment << " val " << er.val_auto_per_segment
        << (er.is_best ? " *" : "") << "\n";
  };

  PlcsdTrainResult result = plcsd_train(trainer, segments, hooks);
  nlohmann::json j;
  j["stage"] = "train-plcsd";
  j["config_hash"] = config_hash(cfg);
  j["epochs_run"] = result.epochs_run;
  j["early_stopped"] = result.early_stopped;
  j["first_epoch_auto"] = result.epochs.front().train_auto_per_segment;
  j["final_epoch_auto"] = result.epochs.back().train_auto_per_segment;
  write_json(log_dir(cfg) / "plcsd_train_report.json", j);
  return j;
}

inline nlohmann::json cmd_train_utterance(const RunConfig& cfg,
                                          std::ostream& log = std::cout) {
  using namespace clidetail;
  fs::path plcsd_path = ckpt_dir(cfg) / "plcsd_last.ckpt";
  require_file(plcsd_path, "train-plcsd");
  PreparedCorpus corpus = load_prepared(cfg);
  Checkpoint plcsd_ckpt = load_checkpoint(plcsd_path.string());

  long n_mels = plcsd_ckpt.extra.at("n_mels").get<long>();
  ModelParams acoustic_params;
  Rng root(cfg.acoustic.seed);
  acoustic_params.groups[acoustic_groups::text_encoder] =
      make_text_encoder_group(cfg.acoustic.d_t, corpus.inventory.size(),
                              root.fork("text"));
  acoustic_params.groups[acoustic_groups::acoustic_model] =
      make_acoustic_group(cfg.acoustic, n_mels, root.fork("am"));

  UtteranceTrainReport report = train_utterance_level(
      corpus.train, plcsd_ckpt.params, acoustic_params, cfg.acoustic,
      corpus.inventory, cfg.silence, [&](long epoch, double mse) {
        log << "train-utterance: epoch " << epoch << " mse " << mse << "\n";
      });

  nlohmann::json extra;
  extra["n_mels"] = n_mels;
  extra["inventory"] = corpus.inventory.phones();
  extra["plcsd_checkpoint_hash"] = file_hash_hex(plcsd_path.string());
  Checkpoint ckpt = make_component_checkpoint(cfg, "acoustic",
                                              report.epochs_run,
                                              acoustic_params, extra);
  save_checkpoint((ckpt_dir(cfg) / "acoustic_last.ckpt").string(), ckpt);

  nlohmann::json j;
  j["stage"] = "train-utterance";
  j["config_hash"] = config_hash(cfg);
  j["epochs_run"] = report.epochs_run;
  j["skipped_utterances"] = report.skipped_utterances;
  j["first_epoch_mse"] = report.epoch_mse.front();
  j["final_epoch_mse"] = report.epoch_mse.back();
  write_json(log_dir(cfg) / "acoustic_train_report.json", j);
  return j;
}

inline nlohmann::json cmd_train_predictor(const RunConfig& cfg,
                                          std::ostream& log = std::cout) {
  using namespace clidetail;
  fs::path plcsd_path = ckpt_dir(cfg) / "plcsd_last.ckpt";
  fs::path acoustic_path = ckpt_dir(cfg) / "acoustic_last.ckpt";
  require_file(plcsd_path, "train-plcsd");
  require_file(acoustic_path, "train-utterance");
  PreparedCorpus corpus = load_prepared(cfg);
  Checkpoint plcsd_ckpt = load_checkpoint(plcsd_path.string());
  Checkpoint acoustic_ckpt = load_checkpoint(acoustic_path.string());

  std::vector<PredictorPair> pairs =
      build_predictor_pairs(corpus.train, acoustic_ckpt.params,
                            plcsd_ckpt.params, corpus.inventory, cfg.silence);

  ModelParams predictor_params;
  predictor_params.groups[acoustic_groups::style_predictor] =
      make_predictor_group(cfg.predictor, Rng(cfg.predictor.seed).fork("sp"));
  predictor_params.groups[acoustic_groups::predictor_stats] =
      make_predictor_stats_group(cfg.predictor.d_s);

  PredictorTrainReport report = train_style_predictor(
      pairs, predictor_params, cfg.predictor, [&](long epoch, double mse) {
        log << "train-predictor: epoch " << epoch << " mse " << mse << "\n";
      });

  nlohmann::json extra;
  extra["inventory"] = corpus.inventory.phones();
  extra["acoustic_checkpoint_hash"] = file_hash_hex(acoustic_path.string());
  Checkpoint ckpt = make_component_checkpoint(
      cfg, "predictor", report.epochs_run, predictor_params, extra);
  save_checkpoint((ckpt_dir(cfg) / "predictor_last.ckpt").string(), ckpt);

  nlohmann::json j;
  j["stage"] = "train-predictor";
  j["config_hash"] = config_hash(cfg);
  j["epochs_run"] = report.epochs_run;
  j["first_epoch_mse"] = report.epoch_mse.front();
  j["final_epoch_mse"] = report.epoch_mse.back();
  write_json(log_dir(cfg) / "predictor_train_report.json", j);
  return j;
}

// ---- generation ----

struct LoadedPipeline {
  PreparedCorpus corpus;
  Checkpoint plcsd;
  Checkpoint acoustic;
  Checkpoint predictor;  // component empty when absent
  SynthesisContext ctx;
  std::string plcsd_hash, acoustic_hash, predictor_hash;
};

inline LoadedPipeline load_pipeline(const RunConfig& cfg, bool need_predictor) {
  using namespace clidetail;
  LoadedPipeline p;
  fs::path plcsd_path = ckpt_dir(cfg) / "plcsd_last.ckpt";
  fs::path acoustic_path = ckpt_dir(cfg) / "acoustic_last.ckpt";
  require_file(plcsd_path, "train-plcsd");
  require_file(acoustic_path, "train-utterance");
  p.corpus = load_prepared(cfg);
  p.plcsd = load_checkpoint(plcsd_path.string());
  p.acoustic = load_checkpoint(acoustic_path.string());
  p.plcsd_hash = file_hash_hex(plcsd_path.string());
  p.acoustic_hash = file_hash_hex(acoustic_path.string());
  if (need_predictor) {
    fs::path predictor_path = ckpt_dir(cfg) / "predictor_last.ckpt";
    require_file(predictor_path, "train-predictor");
    p.predictor = load_checkpoint(predictor_path.string());
    p.predictor_hash = file_hash_hex(predictor_path.string());
  }
  p.ctx.plcsd_params = &p.plcsd.params;
  p.ctx.acoustic_params = &p.acoustic.params;
  p.ctx.predictor_params = need_predictor ? &p.predictor.params : nullptr;
  p.ctx.acoustic_cfg = cfg.acoustic;
  p.ctx.predictor_cfg = cfg.predictor;
  p.ctx.inventory = cfg.inventory.build();
  p.ctx.silence = cfg.silence;
  p.ctx.frame_shift =
      static_cast<double>(cfg.mel.hop_length) / cfg.mel.sample_rate;
  return p;
}

inline const Utterance& find_utterance(const PreparedCorpus& corpus,
                                       const std::string& id) {
  for (const auto& u : corpus.test)
    if (u.id == id) return u;
  for (const auto& u : corpus.train)
    if (u.id == id) return u;
  throw validation_error("unknown utterance id '" + id + "'");
}

inline std::vector<std::string> load_phone_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open phone file " + path);
  std::vector<std::string> phones;
  std::string tok;
  while (in >> tok) phones.push_back(tok);
  if (phones.empty())
    throw validation_error("phone file " + path + " is empty");
  return phones;
}

inline nlohmann::json cmd_generate(const RunConfig& cfg,
                                   const std::string& mode,
                                   const std::string& utt_id,
                                   const std::string& phones_file,
                                   const std::string& ref_id,
                                   std::ostream& log = std::cout) {
  using namespace clidetail;
  GenerationRequest request;
  if (mode == "reconstruct") {
    request.mode = GenerationMode::reconstruct;
    if (utt_id.empty())
      throw validation_error("reconstruct: --utt is required");
  } else if (mode == "transfer") {
    request.mode = GenerationMode::transfer;
    if (phones_file.empty() || ref_id.empty())
      throw validation_error("transfer: --text-phones and --ref are required");
  } else if (mode == "tts") {
    request.mode = GenerationMode::tts;
    if (phones_file.empty())
      throw validation_error("tts: --text-phones is required");
  } else {
    throw validation_error("generate: unknown mode '" + mode + "'");
  }

  LoadedPipeline pipe = load_pipeline(cfg, request.mode == GenerationMode::tts);
  if (!phones_file.empty()) request.source_phones = load_phone_file(phones_file);
  std::string ref_used = ref_id.empty() ? utt_id : ref_id;
  if (request.mode != GenerationMode::tts)
    request.reference = &find_utterance(pipe.corpus, ref_used);

  GenerationResult result = generate(request, pipe.ctx);

  fs::create_directories(gen_dir(cfg));
  std::string stem = mode + "_" + (request.mode == GenerationMode::tts
                                       ? "text"
                                       : ref_used);
  fs::path mel_path = gen_dir(cfg) / (stem + ".mel");
  fs::path wav_path = gen_dir(cfg) / (stem + ".wav");
  fs::path sidecar_path = gen_dir(cfg) / (stem + ".json");
  save_mel(mel_path.string(), result.mel);

  // waveform via Griffin-Lim; mel band count must match the mel config
  bool vocoded = result.mel.n_mels() == cfg.mel.n_mels;
  if (vocoded) {
    std::vector<double> audio = vocode(result.mel, cfg.mel, cfg.vocoder);
    save_wav(wav_path.string(), audio, cfg.mel.sample_rate);
  }

  nlohmann::json sidecar;
  sidecar["stage"] = "generate";
  sidecar["mode"] = mode;
  sidecar["config_hash"] = config_hash(cfg);
  sidecar["source_phones"] = request.source_phones.empty() && request.reference
                                 ? request.reference->phone_sequence
                                 : request.source_phones;
  sidecar["reference_id"] =
      request.mode == GenerationMode::tts ? "" : ref_used;
  sidecar["truncated"] = result.truncated;
  sidecar["n_frames"] = result.mel.n_frames();
  sidecar["mel"] = mel_path.string();
  sidecar["wav"] = vocoded ? wav_path.string() : "";
  sidecar["checkpoints"] = {{"plcsd", pipe.plcsd_hash},
                            {"acoustic", pipe.acoustic_hash},
                            {"predictor", pipe.predictor_hash}};
  write_json(sidecar_path, sidecar);

  // manifest line for external recognizer scoring
  std::ofstream asr(gen_dir(cfg) / "asr_manifest.jsonl", std::ios::app);
  nlohmann::json asr_line;
  asr_line["audio"] = vocoded ? wav_path.string() : "";
  asr_line["mel"] = mel_path.string();
  asr_line["transcript"] = sidecar["source_phones"];
  asr << asr_line.dump() << "\n";

  log << "generate: wrote " << mel_path.string() << "\n";
  return sidecar;
}

// ---- evaluation ----

inline nlohmann::json cmd_evaluate(const RunConfig& cfg,
                                   const std::string& ref_path,
                                   const std::string& syn_path,
                                   const std::string& frames_csv = "",
                                   std::ostream& log = std::cout) {
  auto is_wav = [](const std::string& p) {
    return p.size() > 4 && p.substr(p.size() - 4) == ".wav";
  };
  if (is_wav(ref_path) != is_wav(syn_path))
    throw validation_error("evaluate: ref and syn must both be .wav or .mel");

  nlohmann::json j;
  j["stage"] = "evaluate";
  j["config_hash"] = config_hash(cfg);
  j["ref"] = ref_path;
  j["syn"] = syn_path;

  if (is_wav(ref_path)) {
    WavData ref_wav = load_wav(ref_path);
    WavData syn_wav = load_wav(syn_path);
    PitchTrack ref_track =
        extract_pitch(ref_wav.samples, ref_wav.sample_rate, cfg.pitch);
    PitchTrack syn_track =
        extract_pitch(syn_wav.samples, syn_wav.sample_rate, cfg.pitch);
    MelSpectrogram ref_mel =
        compute_mel(ref_wav.samples, ref_wav.sample_rate, cfg.mel);
    MelSpectrogram syn_mel =
        compute_mel(syn_wav.samples, syn_wav.sample_rate, cfg.mel);
    MetricReport report =
        evaluate_pair(ref_track, syn_track, ref_mel, syn_mel);
    j["vde"] = report.vde;
    j["gpe"] = report.gpe;
    j["ffe"] = report.ffe;
    j["mcd"] = report.mcd;
    j["n_frames"] = report.n_frames;
    j["gpe_defined"] = report.gpe_defined;

    if (!frames_csv.empty()) {
      auto [ar, as] = align_tracks(ref_track, syn_track);
      std::ofstream csv(frames_csv);
      if (!csv) throw io_error("evaluate: cannot open " + frames_csv);
      csv << "index,ref_f0,syn_f0,ref_voiced,syn_voiced,voicing_error,gross_"
             "error\n";
      for (std::size_t i = 0; i < ar.n_frames(); ++i) {
        bool verr = ar.voiced[i] != as.voiced[i];
        bool gerr = ar.voiced[i] && as.voiced[i] &&
                    std::abs(as.f0[i] - ar.f0[i]) > 0.2 * ar.f0[i];
        csv << i << ',' << ar.f0[i] << ',' << as.f0[i] << ','
            << (ar.voiced[i] ? 1 : 0) << ',' << (as.voiced[i] ? 1 : 0) << ','
            << (verr ? 1 : 0) << ',' << (gerr ? 1 : 0) << "\n";
      }
    }
  } else {
    MelSpectrogram ref_mel = load_mel(ref_path);
    MelSpectrogram syn_mel = load_mel(syn_path);
    j["mcd"] = mcd(ref_mel, syn_mel);
    j["n_frames"] = ref_mel.n_frames();
    j["pitch_metrics"] = false;
  }
  log << j.dump(2) << "\n";
  return j;
}

// ---- embedding export ----

inline nlohmann::json cmd_export_embeddings(const RunConfig& cfg,
                                            const std::string& out_path,
                                            bool test_split_only,
                                            std::ostream& log = std::cout) {
  using namespace clidetail;
  fs::path plcsd_path = ckpt_dir(cfg) / "plcsd_last.ckpt";
  require_file(plcsd_path, "train-plcsd");
  PreparedCorpus corpus = load_prepared(cfg);
  Checkpoint plcsd_ckpt = load_checkpoint(plcsd_path.string());

  std::vector<PhoneSegment> segments;
  const std::vector<Utterance>& utts =
      test_split_only ? corpus.test : corpus.train;
  for (const Utterance& utt : utts)
    for (PhoneSegment& s : segment_utterance(utt, cfg.silence))
      segments.push_back(std::move(s));
  export_embeddings(segments, plcsd_ckpt.params, out_path);
  log << "export-embeddings: wrote " << 2 * segments.size() << " rows to "
      << out_path << "\n";
  nlohmann::json j;
  j["stage"] = "export-embeddings";
  j["config_hash"] = config_hash(cfg);
  j["rows"] = 2 * segments.size();
  j["path"] = out_path;
  return j;
}

}  // namespace csd
