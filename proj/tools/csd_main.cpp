// csd: content-style disentanglement pipeline for expressive speech
// synthesis. Subcommands cover the whole experiment flow: corpus
// preparation, the three training stages, generation, and evaluation.
//
// Exit codes: 0 success, 2 validation/input error, 3 numeric failure,
// 4 missing prerequisite stage.

#include <CLI11.hpp>
#include <iostream>
#include <string>

#include "csd/cli/commands.hpp"
#include "csd/cli/config.hpp"

namespace {

csd::RunConfig load_config_or_default(const std::string& path) {
  if (path.empty()) return csd::RunConfig{};
  return csd::load_run_config(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"content-style disentanglement speech pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "run configuration JSON")
      ->envname("CSD_CONFIG");

  std::string synth_dest = "synthetic_corpus";
  auto* make_synth = app.add_subcommand(
      "make-synthetic", "generate the synthetic verification corpus");
  make_synth->add_option("--dest", synth_dest, "destination directory");

  auto* prepare = app.add_subcommand(
      "prepare", "ingest the corpus manifest into the mel/segment cache");

  std::string resume_path;
  auto* train_plcsd = app.add_subcommand(
      "train-plcsd", "phone-level disentanglement training");
  train_plcsd->add_option("--resume", resume_path, "checkpoint to resume from");

  auto* train_utt = app.add_subcommand(
      "train-utterance", "utterance-level acoustic training");
  auto* train_pred =
      app.add_subcommand("train-predictor", "style predictor training");

  std::string utt_id, phones_file, ref_id;
  auto* reconstruct =
      app.add_subcommand("reconstruct", "resynthesize an utterance");
  reconstruct->add_option("--utt", utt_id, "utterance id")->required();

  auto* transfer = app.add_subcommand(
      "transfer", "style transfer from a reference utterance");
  transfer->add_option("--text-phones", phones_file,
                       "file with source phone labels")
      ->required();
  transfer->add_option("--ref", ref_id, "reference utterance id")->required();

  auto* tts = app.add_subcommand("tts", "synthesis from phones alone");
  tts->add_option("--text-phones", phones_file,
                  "file with source phone labels")
      ->required();

  std::string eval_ref, eval_syn, frames_csv;
  auto* evaluate = app.add_subcommand(
      "evaluate", "pitch/voicing/cepstral metrics for a file pair");
  evaluate->add_option("--ref", eval_ref, "reference .wav or .mel")->required();
  evaluate->add_option("--syn", eval_syn, "synthesized .wav or .mel")
      ->required();
  evaluate->add_option("--frames-csv", frames_csv,
                       "optional per-frame diagnostics CSV");

  std::string embed_out = "embeddings.tsv";
  bool embed_train = false;
  auto* export_emb = app.add_subcommand(
      "export-embeddings", "dump content/style embeddings as TSV");
  export_emb->add_option("--out", embed_out, "output TSV path");
  export_emb->add_flag("--train-split", embed_train,
                       "export the training split instead of the test split");

  CLI11_PARSE(app, argc, argv);

  try {
    csd::RunConfig cfg = load_config_or_default(config_path);
    if (make_synth->parsed()) {
      csd::cmd_make_synthetic(cfg, synth_dest);
    } else if (prepare->parsed()) {
      csd::cmd_prepare(cfg);
    } else if (train_plcsd->parsed()) {
      csd::cmd_train_plcsd(cfg, resume_path);
    } else if (train_utt->parsed()) {
      csd::cmd_train_utterance(cfg);
    } else if (train_pred->parsed()) {
      csd::cmd_train_predictor(cfg);
    } else if (reconstruct->parsed()) {
      csd::cmd_generate(cfg, "reconstruct", utt_id, "", "");
    } else if (transfer->parsed()) {
      csd::cmd_generate(cfg, "transfer", "", phones_file, ref_id);
    } else if (tts->parsed()) {
      csd::cmd_generate(cfg, "tts", "", phones_file, "");
    } else if (evaluate->parsed()) {
      csd::cmd_evaluate(cfg, eval_ref, eval_syn, frames_csv);
    } else if (export_emb->parsed()) {
      csd::cmd_export_embeddings(cfg, embed_out, !embed_train);
    }
  } catch (const csd::prerequisite_error& e) {
    std::cerr << "error (missing prerequisite): " << e.what() << "\n";
    return 4;
  } catch (const csd::numeric_error& e) {
    std::cerr << "error (numeric): " << e.what() << "\n";
    return 3;
  } catch (const csd::validation_error& e) {
    std::cerr << "error (validation): " << e.what() << "\n";
    return 2;
  } catch (const csd::io_error& e) {
    std::cerr << "error (io): " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
