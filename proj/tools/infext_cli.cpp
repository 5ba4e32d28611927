#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "infext/harness.hpp"

using namespace infext;

namespace {

ExperimentConfig load_experiment(const std::string& preset, const std::string& config_path) {
  ExperimentConfig base = preset_config(preset);
  if (config_path.empty()) return base;
  return parse_config(config_path, base);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Informed echo extraction: scene simulation, training and evaluation"};
  app.require_subcommand(1);

  // gen-rir
  GenRirArgs rir;
  std::string room_text;
  std::string rir_out;
  auto* gen_rir = app.add_subcommand("gen-rir", "Simulate one room impulse response");
  gen_rir->add_option("--room", room_text, "Room size WxLxH in metres")->required();
  gen_rir->add_option("--t60", rir.t60, "Reverberation time in seconds (0 = anechoic)")->required();
  gen_rir->add_option("--distance", rir.distance, "Source-microphone distance in metres")->required();
  gen_rir->add_option("--out", rir_out, "Output WAV path")->required();
  gen_rir->add_option("--seed", rir.seed, "Placement seed");
  gen_rir->add_option("--sample-rate", rir.sample_rate, "Sample rate in Hz");

  // gen-scenes
  GenScenesArgs scenes;
  std::string split_text = "test", subset_text, scenes_out, scenes_preset = "desk", scenes_config;
  auto* gen_scenes = app.add_subcommand("gen-scenes", "Write mixture scenes and a manifest");
  gen_scenes->add_option("--split", split_text, "train, val or test")->required();
  gen_scenes->add_option("--count", scenes.count, "Number of scenes")->required();
  gen_scenes->add_option("--out", scenes_out, "Output directory")->required();
  gen_scenes->add_option("--seed", scenes.seed, "Stream seed");
  gen_scenes->add_option("--subset", subset_text, "Force SS, SN, NS or NN");
  gen_scenes->add_flag("--switch-scenario", scenes.switch_scenario,
                       "Two far-end talkers with an echo-path change halfway");
  gen_scenes->add_option("--preset", scenes_preset, "desk or full");
  gen_scenes->add_option("--config", scenes_config, "Experiment config file");

  // train
  std::string train_config, train_out, train_preset = "desk", train_resume;
  auto* train_cmd = app.add_subcommand("train", "Train an extraction model");
  train_cmd->add_option("--config", train_config, "Experiment config file");
  train_cmd->add_option("--out", train_out, "Output directory")->required();
  train_cmd->add_option("--preset", train_preset, "Base profile under the config: desk or full");
  train_cmd->add_option("--resume", train_resume, "Checkpoint to continue from");

  // eval
  EvalArgs eval;
  std::string eval_manifest, eval_out;
  auto* eval_cmd = app.add_subcommand("eval", "SI-SDRi per subset on a manifest");
  eval_cmd->add_option("--checkpoint", eval.checkpoint,
                       "Checkpoint file, stub:oracle or stub:zero")->required();
  eval_cmd->add_option("--manifest", eval_manifest, "manifest.jsonl")->required();
  eval_cmd->add_option("--out", eval_out, "Output directory")->required();

  // demo-switch
  DemoArgs demo;
  std::string demo_out;
  auto* demo_cmd = app.add_subcommand("demo-switch", "Echo-path switch demo with plots");
  demo_cmd->add_option("--checkpoint", demo.checkpoint, "Checkpoint file")->required();
  demo_cmd->add_option("--out", demo_out, "Output directory")->required();
  demo_cmd->add_option("--seed", demo.seed, "Scenario seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen_rir) {
      rir.room = parse_room(room_text);
      rir.out = rir_out;
      const Rir r = cmd_gen_rir(rir);
      std::cout << "wrote " << rir_out << " (" << r.taps.size() << " taps, beta " << r.beta
                << ")\n";
    } else if (*gen_scenes) {
      scenes.split = parse_split(split_text);
      scenes.out = scenes_out;
      if (!subset_text.empty()) scenes.subset = parse_subset(subset_text);
      scenes.config = load_experiment(scenes_preset, scenes_config);
      const auto entries = cmd_gen_scenes(scenes);
      std::cout << "wrote " << entries.size() << " scenes to " << scenes_out << '\n';
    } else if (*train_cmd) {
      ExperimentConfig cfg = load_experiment(train_preset, train_config);
      if (!train_resume.empty()) cfg.paths.resume = train_resume;
      const TrainResult r = cmd_train(cfg, train_out, &std::cout);
      std::cout << "finished at epoch " << r.last.epoch
                << (r.early_stopped ? " (early stop)" : "") << '\n';
    } else if (*eval_cmd) {
      eval.manifest = eval_manifest;
      eval.out = eval_out;
      const MetricReport report = cmd_eval(eval);
      std::cout << "SS,SN,NS,NN,mean\n";
      for (const char* s : {"SS", "SN", "NS", "NN"}) {
        const auto means = report.subset_means();
        auto it = means.find(s);
        std::cout << (it == means.end() ? std::string("nan") : std::to_string(it->second)) << ',';
      }
      std::cout << report.overall_mean() << '\n';
    } else if (*demo_cmd) {
      demo.out = demo_out;
      const DemoResult r = cmd_demo_switch(demo);
      std::cout << "ERLE frames " << r.erle_rows << ", embedding " << r.emb_rows << " x "
                << r.emb_cols << '\n';
    }
  } catch (const TrainingAborted& e) {
    std::cerr << "training aborted: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
