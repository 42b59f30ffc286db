#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "hdrunet/commands.hpp"
#include "hdrunet/errors.hpp"

namespace cli = hdrunet::cli;

namespace {

bool parse_size(const std::string& text, std::size_t& h, std::size_t& w) {
  unsigned long hh = 0, ww = 0;
  char tail = 0;
  if (std::sscanf(text.c_str(), "%lux%lu%c", &hh, &ww, &tail) != 2 || hh == 0 || ww == 0) {
    return false;
  }
  h = hh;
  w = ww;
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HDR reconstruction from a single LDR image"};
  app.require_subcommand(1);
  int code = 0;

  cli::SynthDataOptions synth;
  std::string size = "64x64";
  std::string params;
  auto* synth_cmd = app.add_subcommand("synth-data", "Generate synthetic HDR/LDR pairs and a manifest");
  synth_cmd->add_option("--out", synth.out, "Output directory")->required();
  synth_cmd->add_option("--scenes", synth.scenes, "Number of scenes (takes)")->required();
  synth_cmd->add_option("--size", size, "Frame size HxW")->required();
  synth_cmd->add_option("--seed", synth.seed, "Random seed")->required();
  synth_cmd->add_option("--params", params, "Config file with degradation keys");
  synth_cmd->add_option("--frames-per-take", synth.frames_per_take, "Frames per take");
  synth_cmd->add_option("--val-per-take", synth.val_per_take, "Validation frames per take");

  cli::TrainOptions train;
  std::string resume;
  auto* train_cmd = app.add_subcommand("train", "Train a model");
  train_cmd->add_option("--config", train.config, "Run config")->required();
  train_cmd->add_option("--data", train.data, "Dataset directory")->required();
  train_cmd->add_option("--out", train.out, "Output directory")->required();
  train_cmd->add_option("--resume", resume, "Checkpoint to resume from");

  cli::InferOptions infer;
  std::string infer_config;
  auto* infer_cmd = app.add_subcommand("infer", "Reconstruct a 16-bit HDR PNG from an 8-bit LDR PNG");
  infer_cmd->add_option("--ckpt", infer.checkpoint, "Checkpoint")->required();
  infer_cmd->add_option("--in", infer.input, "LDR input")->required();
  infer_cmd->add_option("--out", infer.output, "HDR output")->required();
  infer_cmd->add_option("--config", infer_config, "Architecture override");

  cli::EvalOptions eval;
  auto* eval_cmd = app.add_subcommand("eval", "PSNR-L and PSNR-mu over matching PNG files");
  eval_cmd->add_option("--pred", eval.pred, "Prediction directory")->required();
  eval_cmd->add_option("--gt", eval.gt, "Ground-truth directory")->required();

  cli::GradCheckCommandOptions grad;
  std::string grad_config;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every parameter group");
  grad_cmd->add_option("--config", grad_config, "Config whose model keys replace the tiny default");
  grad_cmd->add_flag("--inject-fault", grad.inject_fault, "Plant a wrong backward rule (negative control)");

  cli::AblateOptions ablate;
  auto* ablate_cmd = app.add_subcommand("ablate-modulation", "Train each modulation strategy and compare");
  ablate_cmd->add_option("--config", ablate.config, "Run config")->required();
  ablate_cmd->add_option("--data", ablate.data, "Dataset directory")->required();

  cli::GradientMapOptions gmap;
  auto* gmap_cmd = app.add_subcommand("gradient-map", "Scharr gradient magnitude as a 16-bit PNG");
  gmap_cmd->add_option("--in", gmap.input, "Input PNG")->required();
  gmap_cmd->add_option("--out", gmap.output, "Output PNG")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth_cmd->parsed()) {
      if (!parse_size(size, synth.height, synth.width)) {
        throw hdrunet::ShapeError("invalid --size '" + size + "', expected HxW");
      }
      if (!params.empty()) {
        synth.params = params;
      }
      code = cli::synth_data(synth, std::cout);
    } else if (train_cmd->parsed()) {
      if (!resume.empty()) {
        train.resume = resume;
      }
      code = cli::train(train, std::cout);
    } else if (infer_cmd->parsed()) {
      if (!infer_config.empty()) {
        infer.config = infer_config;
      }
      code = cli::infer(infer, std::cout);
    } else if (eval_cmd->parsed()) {
      code = cli::eval(eval, std::cout);
    } else if (grad_cmd->parsed()) {
      if (!grad_config.empty()) {
        grad.config = grad_config;
      }
      code = cli::gradcheck(grad, std::cout);
    } else if (ablate_cmd->parsed()) {
      code = cli::ablate_modulation(ablate, std::cout);
    } else if (gmap_cmd->parsed()) {
      code = cli::gradient_map(gmap, std::cout);
    }
  } catch (const hdrunet::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return code;
}
