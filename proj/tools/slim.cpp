// Copyright 2026 The slim Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <CLI11.hpp>

#include <algorithm>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "slim/ablation.hpp"
#include "slim/augment.hpp"
#include "slim/config.hpp"
#include "slim/dataset.hpp"
#include "slim/errors.hpp"
#include "slim/metrics.hpp"
#include "slim/model_io.hpp"
#include "slim/parallel.hpp"
#include "slim/pruner.hpp"
#include "slim/trainer.hpp"

namespace fs = std::filesystem;
using namespace slim;

namespace {

constexpr int kValidationExit = 1;
constexpr int kRuntimeExit = 2;

// Command-line values that override the config file, keyed "section.key".
struct Overrides {
  std::string config;
  std::vector<std::string> assignments;
  std::deque<std::pair<std::string, std::string>> flag_values;

  void flag(CLI::App* app, const std::string& name, const std::string& key, const std::string& help) {
    app->add_option(name, flag_values.emplace_back(key, std::string{}).second, help);
  }
};

std::pair<std::string, std::string> split_key(const std::string& dotted) {
  const auto dot = dotted.find('.');
  if (dot == std::string::npos) return {"", dotted};
  return {dotted.substr(0, dot), dotted.substr(dot + 1)};
}

KeyValueFile resolve(const Overrides& o) {
  KeyValueFile kv;
  if (!o.config.empty()) {
    if (!fs::exists(o.config)) throw ConfigError("config file not found: " + o.config);
    kv = KeyValueFile::load(o.config);
  }
  for (const auto& a : o.assignments) {
    const auto eq = a.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects section.key=value, got '" + a + "'");
    const auto [section, key] = split_key(trim(a.substr(0, eq)));
    kv.set(section, key, trim(a.substr(eq + 1)));
  }
  for (const auto& [dotted, value] : o.flag_values) {
    if (value.empty()) continue;
    const auto [section, key] = split_key(dotted);
    kv.set(section, key, value);
  }
  return kv;
}

fs::path existing_path(const KeyValueFile& kv, const std::string& section, const std::string& key) {
  const auto v = kv.get(section, key);
  if (!v || v->empty()) throw ConfigError(section + "." + key + " is required");
  if (!fs::exists(*v)) throw ConfigError(section + "." + key + ": path not found: " + *v);
  return *v;
}

fs::path output_dir(const KeyValueFile& kv) {
  const fs::path dir = kv.get_string("output", "dir", "out");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

std::vector<std::string> list_value(const std::string& text) {
  std::string s = text;
  std::replace(s.begin(), s.end(), ',', ' ');
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

TrainConfig train_config(const KeyValueFile& kv, double default_l1, int default_epochs) {
  TrainConfig c;
  c.epochs = static_cast<int>(kv.get_int("train", "epochs", default_epochs));
  c.batch_size = static_cast<Index>(kv.get_int("train", "batch_size", c.batch_size));
  c.lr = kv.get_double("train", "lr", c.lr);
  c.momentum = kv.get_double("train", "momentum", c.momentum);
  c.l1_coeff = kv.get_double("train", "l1", default_l1);
  c.seed = static_cast<std::uint64_t>(kv.get_int("train", "seed", 1));
  const std::string schedule = kv.get_string("train", "schedule", "constant");
  if (schedule == "step") c.schedule = LrSchedule::kStepDecay;
  else if (schedule != "constant") throw ConfigError("train.schedule must be constant or step");
  c.step_epochs = static_cast<int>(kv.get_int("train", "step_epochs", c.step_epochs));
  c.decay_factor = kv.get_double("train", "decay_factor", c.decay_factor);
  return c;
}

AugmentConfig augment_config(const KeyValueFile& kv) {
  AugmentConfig a;
  a.exposure_factor = kv.get_double("augment", "exposure_factor", a.exposure_factor);
  a.saturation_factor = kv.get_double("augment", "saturation_factor", a.saturation_factor);
  a.hue_factor = kv.get_double("augment", "hue_factor", a.hue_factor);
  a.angle_range_deg = kv.get_double("augment", "angle_range", a.angle_range_deg);
  if (const auto set = kv.get("augment", "scale_set")) {
    a.scale_set.clear();
    for (const auto& w : list_value(*set)) a.scale_set.push_back(static_cast<Index>(parse_int(w, "augment.scale_set")));
  }
  a.shape = kv.get_bool("augment", "shape", false);
  a.rotate = kv.get_bool("augment", "angle", false);
  a.saturation = kv.get_bool("augment", "saturation", false);
  a.exposure = kv.get_bool("augment", "exposure", false);
  a.hue = kv.get_bool("augment", "hue", false);
  a.seed = static_cast<std::uint64_t>(kv.get_int("augment", "seed", 1));
  a.validate();
  return a;
}

void check_compatible(const ModelGraph& m, const SyntheticDataset& ds) {
  if (m.input.channels != 3) throw ConfigError("model input must have 3 channels for RGB datasets");
  if (m.num_classes != ds.num_classes) {
    throw ConfigError("model has " + std::to_string(m.num_classes) + " classes, dataset has " +
                      std::to_string(ds.num_classes));
  }
}

void print_epochs(const std::vector<EpochMetrics>& epochs) {
  for (const auto& e : epochs) {
    std::cout << "epoch " << e.epoch << "  loss " << std::setprecision(4) << e.total_loss << "  accuracy "
              << e.accuracy << "  sum|scale| " << e.sum_abs_scale << '\n';
  }
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

// ---------------------------------------------------------------- commands

int cmd_generate(const KeyValueFile& kv) {
  RenderOptions test_opts;
  test_opts.radius_min = kv.get_double("data", "test_radius_min", test_opts.radius_min);
  test_opts.radius_max = kv.get_double("data", "test_radius_max", test_opts.radius_max);
  test_opts.light_min = kv.get_double("data", "test_light_min", test_opts.light_min);
  test_opts.light_max = kv.get_double("data", "test_light_max", test_opts.light_max);
  test_opts.validate();
  const auto ds = generate_dataset(static_cast<std::uint64_t>(kv.get_int("data", "seed", 1)),
                                   static_cast<Index>(kv.get_int("data", "train", 1000)),
                                   static_cast<Index>(kv.get_int("data", "test", 300)),
                                   static_cast<Index>(kv.get_int("data", "image_size", 16)),
                                   static_cast<int>(kv.get_int("data", "classes", 10)), {}, test_opts);
  const fs::path dir = output_dir(kv);
  write_dataset(ds, dir);
  std::cout << "wrote " << ds.train.size() << " train and " << ds.test.size() << " test images to " << dir.string()
            << '\n';
  return 0;
}

int cmd_train(const KeyValueFile& kv, bool sparse) {
  const fs::path desc_path = existing_path(kv, "model", "description");
  const fs::path data_path = existing_path(kv, "data", "path");
  const TrainConfig tc = train_config(kv, sparse ? 1e-4 : 0.0, 10);
  tc.validate();
  const AugmentConfig ac = augment_config(kv);
  const ModelGraph m = build_model(load_model_description(desc_path), static_cast<std::uint64_t>(kv.get_int("model", "seed", 1)));
  const auto ds = read_dataset(data_path);
  check_compatible(m, ds);
  const fs::path dir = output_dir(kv);

  const Augmenter aug(ac);
  BatchTransform transform;
  if (ac.any_enabled()) transform = [&aug](std::span<const Image> b, std::uint64_t i) { return aug(b, i); };
  const TrainResult r = train(m, ds.train, tc, transform);
  print_epochs(r.epochs);
  save_model(r.model, dir / "model.slim");
  auto csv = open_out(dir / "metrics.csv");
  write_metrics_csv(csv, r.epochs);
  std::cout << "test accuracy " << classify_accuracy(r.model, ds.test) << "\nwrote " << (dir / "model.slim").string()
            << '\n';
  return 0;
}

int cmd_prune(const KeyValueFile& kv) {
  const fs::path input = existing_path(kv, "prune", "input");
  const PruneMethod method = parse_prune_method(kv.get_string("prune", "method", "normal"));
  const double ratio = kv.get_double("prune", "ratio", 0.5);
  if (!(ratio >= 0.0 && ratio < 1.0)) throw ConfigError("prune.ratio must lie in [0, 1)");
  const fs::path dir = output_dir(kv);

  const ModelGraph m = load_model(input);
  const PrunePlan plan = plan_prune(m, ratio, method);
  const ModelGraph pruned = apply_prune(m, plan);
  save_model(pruned, dir / "pruned.slim");
  {
    auto out = open_out(dir / "plan.txt");
    write_plan(out, plan);
  }
  const CompressionReport report = compression_report(m, input, pruned, dir / "pruned.slim");
  {
    auto out = open_out(dir / "report.csv");
    write_report(out, report);
  }
  auto out = open_out(dir / "prune.csv");
  out << "model,prune_method,prune_ratio,model_volume_bytes,compressing_ratio\n"
      << input.filename().string() << ",none,0," << report.before.bytes << ",100.00\n"
      << "pruned.slim," << to_string(method) << ',' << ratio << ',' << report.after.bytes << ',' << std::fixed
      << std::setprecision(2) << report.ratio * 100.0 << '\n';
  std::cout << "removed " << plan.removed << " of " << plan.total_channels << " channels ("
            << plan.guard_restored << " restored by the layer guard); volume " << report.before.bytes << " -> "
            << report.after.bytes << " bytes, " << std::fixed << std::setprecision(2) << report.ratio * 100.0
            << "%\n";
  return 0;
}

int cmd_finetune(const KeyValueFile& kv) {
  const fs::path input = existing_path(kv, "finetune", "input");
  const fs::path data_path = existing_path(kv, "data", "path");
  TrainConfig tc = train_config(kv, 0.0, 2);
  tc.validate(true);
  const ModelGraph m = load_model(input);
  const auto ds = read_dataset(data_path);
  check_compatible(m, ds);
  const fs::path dir = output_dir(kv);
  const TrainResult r = finetune(m, ds.train, tc);
  print_epochs(r.epochs);
  save_model(r.model, dir / "finetuned.slim");
  auto csv = open_out(dir / "metrics.csv");
  write_metrics_csv(csv, r.epochs);
  std::cout << "test accuracy " << classify_accuracy(r.model, ds.test) << '\n';
  return 0;
}

int cmd_eval(const KeyValueFile& kv) {
  const fs::path input = existing_path(kv, "eval", "input");
  const fs::path data_path = existing_path(kv, "data", "path");
  const ModelGraph m = load_model(input);
  const auto ds = read_dataset(data_path);
  check_compatible(m, ds);
  const double acc = classify_accuracy(m, ds.test);
  const double map = mean_average_precision(classifier_detections(m, ds.test), ground_truth_boxes(ds.test)).map;
  const fs::path dir = output_dir(kv);
  auto out = open_out(dir / "eval.csv");
  out << "model,accuracy,map\n" << input.filename().string() << ',' << std::fixed << std::setprecision(4) << acc
      << ',' << map << '\n';
  std::cout << "accuracy " << acc << "  mAP@0.5 " << map << '\n';
  return 0;
}

int cmd_bench(const KeyValueFile& kv) {
  const auto models_text = kv.get("bench", "models");
  if (!models_text) throw ConfigError("bench.models is required");
  const auto names = list_value(*models_text);
  if (names.empty()) throw ConfigError("bench.models is empty");
  for (const auto& n : names)
    if (!fs::exists(n)) throw ConfigError("bench model not found: " + n);
  const fs::path baseline = kv.get_string("bench", "baseline", names.front());
  if (!fs::exists(baseline)) throw ConfigError("bench baseline not found: " + baseline.string());
  const int reps = static_cast<int>(kv.get_int("bench", "reps", 50));
  const int warmup = static_cast<int>(kv.get_int("bench", "warmup", 5));
  if (reps < 1 || warmup < 0) throw ConfigError("bench.reps must be >= 1 and bench.warmup >= 0");
  std::optional<SyntheticDataset> ds;
  if (kv.has("data", "path")) ds = read_dataset(existing_path(kv, "data", "path"));
  const fs::path dir = output_dir(kv);

  const auto base_bytes = model_volume(baseline);
  auto out = open_out(dir / "bench.csv");
  out << "model,model_volume_bytes,compressing_ratio,latency_mean_s,latency_stddev_s,threads,accuracy,map\n";
  for (const auto& name : names) {
    const ModelGraph m = load_model(name);
    const auto bytes = model_volume(name);
    const LatencyStats lat = measure_latency(m, m.input, reps, warmup);
    std::ostringstream row;
    row << name << ',' << bytes << ',' << std::fixed << std::setprecision(2)
        << compression_ratio(base_bytes, bytes) * 100.0 << ',' << std::scientific << std::setprecision(6)
        << lat.mean << ',' << lat.stddev << ',' << lat.threads << ',';
    if (ds) {
      check_compatible(m, *ds);
      row << std::fixed << std::setprecision(4) << classify_accuracy(m, ds->test) << ','
          << mean_average_precision(classifier_detections(m, ds->test), ground_truth_boxes(ds->test)).map;
    } else {
      row << ',';
    }
    out << row.str() << '\n';
    std::cout << row.str() << '\n';
  }
  return 0;
}

int cmd_ablate(const KeyValueFile& kv) {
  AblationSettings s;
  s.model = load_model_description(existing_path(kv, "model", "description"));
  const auto ds = read_dataset(existing_path(kv, "data", "path"));
  s.train = train_config(kv, 0.0, 30);
  s.augment = augment_config(kv);
  if (const auto m = kv.get("ablate", "methods")) s.methods = list_value(*m);
  s.seed = static_cast<std::uint64_t>(kv.get_int("ablate", "seed", 1));
  s.validate();
  if (s.model.num_classes != ds.num_classes) throw ConfigError("model and dataset class counts differ");
  const fs::path dir = output_dir(kv);
  const auto rows = run_ablation(s, ds.train, ds.test);
  auto out = open_out(dir / "ablation.csv");
  write_ablation_csv(out, rows);
  write_ablation_csv(std::cout, rows);
  return 0;
}

int cmd_preview(const KeyValueFile& kv) {
  const auto inputs_text = kv.get("preview", "images");
  if (!inputs_text) throw ConfigError("preview.images is required");
  const auto inputs = list_value(*inputs_text);
  for (const auto& p : inputs)
    if (!fs::exists(p)) throw ConfigError("preview image not found: " + p);
  const AugmentConfig ac = augment_config(kv);
  const fs::path dir = output_dir(kv);
  int written = 0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Image img = read_ppm(inputs[i]);
    const std::string stem = fs::path(inputs[i]).stem().string();
    const auto emit = [&](const std::string& method, const Image& out) {
      write_ppm(out, dir / (stem + "_" + method + ".ppm"));
      ++written;
    };
    auto rng = [&](std::uint64_t method) { return derived_rng(ac.seed, i, method); };
    if (!ac.any_enabled()) emit("identity", img);
    if (ac.shape) {
      auto r = rng(0);
      emit("shape", random_shape_resize(std::span<const Image>(&img, 1), ac.scale_set, r).images.front());
    }
    if (ac.rotate) {
      auto r = rng(1);
      emit("angle", random_rotate(img, ac.angle_range_deg, r).image);
    }
    if (ac.saturation) emit("saturation", adjust_hsv(img, HsvComponent::kSaturation, ac.saturation_factor));
    if (ac.exposure) emit("exposure", adjust_hsv(img, HsvComponent::kExposure, ac.exposure_factor));
    if (ac.hue) emit("hue", adjust_hsv(img, HsvComponent::kHue, ac.hue_factor));
  }
  std::cout << "wrote " << written << " images to " << dir.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Channel pruning toolkit: sparse training, pruning, fine-tuning and benchmarking"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  struct Command {
    CLI::App* app;
    Overrides o;
  };
  std::vector<std::unique_ptr<Command>> commands;
  const auto add = [&](const std::string& name, const std::string& help) {
    auto& c = *commands.emplace_back(std::make_unique<Command>(Command{app.add_subcommand(name, help), {}}));
    c.app->add_option("-c,--config", c.o.config, "Key-value run config");
    c.app->add_option("--set", c.o.assignments, "Override, section.key=value (repeatable)");
    c.o.flag(c.app, "-o,--out", "output.dir", "Output directory");
    return &c;
  };

  auto* gen = add("generate-dataset", "Render the synthetic shapes dataset");
  gen->o.flag(gen->app, "--seed", "data.seed", "Dataset seed");
  gen->o.flag(gen->app, "--train", "data.train", "Training images");
  gen->o.flag(gen->app, "--test", "data.test", "Test images");
  gen->o.flag(gen->app, "--size", "data.image_size", "Image side in pixels");
  gen->o.flag(gen->app, "--classes", "data.classes", "Class count");

  auto training_flags = [](Command* c) {
    c->o.flag(c->app, "--model", "model.description", "Model description file");
    c->o.flag(c->app, "--data", "data.path", "Dataset directory");
    c->o.flag(c->app, "--epochs", "train.epochs", "Epochs");
    c->o.flag(c->app, "--lr", "train.lr", "Learning rate");
    c->o.flag(c->app, "--batch", "train.batch_size", "Batch size");
    c->o.flag(c->app, "--seed", "train.seed", "Data order seed");
  };
  auto* tr = add("train", "Train without the scale penalty");
  training_flags(tr);
  tr->o.flag(tr->app, "--l1", "train.l1", "Scale penalty coefficient (default 0)");
  auto* sp = add("sparse-train", "Train with the L1 penalty on batchnorm scales");
  training_flags(sp);
  sp->o.flag(sp->app, "--l1", "train.l1", "Scale penalty coefficient (default 1e-4)");

  auto* pr = add("prune", "Plan and apply channel pruning");
  pr->o.flag(pr->app, "-i,--input", "prune.input", "Model file");
  pr->o.flag(pr->app, "--method", "prune.method", "normal or regular");
  pr->o.flag(pr->app, "--ratio", "prune.ratio", "Fraction of channels to remove, in [0, 1)");

  auto* ft = add("finetune", "Train a pruned model with the penalty off");
  ft->o.flag(ft->app, "-i,--input", "finetune.input", "Model file");
  ft->o.flag(ft->app, "--data", "data.path", "Dataset directory");
  ft->o.flag(ft->app, "--epochs", "train.epochs", "Epochs (default 2)");
  ft->o.flag(ft->app, "--lr", "train.lr", "Learning rate");
  ft->o.flag(ft->app, "--seed", "train.seed", "Data order seed");

  auto* ev = add("eval", "Accuracy and mAP on the test split");
  ev->o.flag(ev->app, "-i,--input", "eval.input", "Model file");
  ev->o.flag(ev->app, "--data", "data.path", "Dataset directory");

  auto* be = add("bench", "Volume, latency and accuracy for a list of models");
  be->o.flag(be->app, "--models", "bench.models", "Comma-separated model files, in report order");
  be->o.flag(be->app, "--baseline", "bench.baseline", "Reference model for the ratio (default: first)");
  be->o.flag(be->app, "--data", "data.path", "Dataset directory (optional)");
  be->o.flag(be->app, "--reps", "bench.reps", "Timed forwards per model");

  auto* ab = add("ablate", "Augmentation ablation table");
  ab->o.flag(ab->app, "--model", "model.description", "Model description file");
  ab->o.flag(ab->app, "--data", "data.path", "Dataset directory");
  ab->o.flag(ab->app, "--methods", "ablate.methods", "Comma-separated methods (default all five)");
  ab->o.flag(ab->app, "--seed", "ablate.seed", "Run seed");
  ab->o.flag(ab->app, "--epochs", "train.epochs", "Epochs per run");

  auto* pv = add("augment-preview", "Write one transformed copy per enabled method");
  pv->o.flag(pv->app, "--images", "preview.images", "Comma-separated PPM files");
  pv->o.flag(pv->app, "--seed", "augment.seed", "Augmentation seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kValidationExit;
  }

  try {
    Command* active = nullptr;
    for (auto& c : commands)
      if (c->app->parsed()) active = c.get();
    const KeyValueFile kv = resolve(active->o);
    const std::string name = active->app->get_name();
    if (name == "generate-dataset") return cmd_generate(kv);
    if (name == "train") return cmd_train(kv, false);
    if (name == "sparse-train") return cmd_train(kv, true);
    if (name == "prune") return cmd_prune(kv);
    if (name == "finetune") return cmd_finetune(kv);
    if (name == "eval") return cmd_eval(kv);
    if (name == "bench") return cmd_bench(kv);
    if (name == "ablate") return cmd_ablate(kv);
    return cmd_preview(kv);
  } catch (const ConfigError& e) {
    std::cerr << "slim: invalid configuration: " << e.what() << '\n';
    return kValidationExit;
  } catch (const ArgumentError& e) {
    std::cerr << "slim: invalid argument: " << e.what() << '\n';
    return kValidationExit;
  } catch (const std::exception& e) {
    std::cerr << "slim: error: " << e.what() << '\n';
    return kRuntimeExit;
  }
}
