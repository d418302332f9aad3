// Copyright 2026 The vidinsert Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end. run_cli() is callable in-process so tests can
// drive every subcommand without spawning processes.
//
// Exit codes: 0 ok, 2 usage, 3 input (missing/malformed files, shapes),
// 4 numeric or pipeline abort. Failures print one line on stderr:
//   error: code=<n> kind=<kind> message="<text>"

#ifndef VIDINSERT_TOOLS_CLI_APP_HPP_
#define VIDINSERT_TOOLS_CLI_APP_HPP_

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "vidinsert.hpp"

namespace vidinsert::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kUsage = 2, kInput = 3, kNumeric = 4 };

// Effective run configuration: {checkpoint, model, guidance, out}.
struct RunConfig {
  std::optional<fs::path> checkpoint;
  ModelConfig model;
  bool model_given = false;
  bool channels_given = false;
  GuidanceConfig guidance;
  std::optional<fs::path> out;
};

inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j;
  j["checkpoint"] = c.checkpoint ? nlohmann::json(c.checkpoint->string()) : nlohmann::json(nullptr);
  j["model"] = vidinsert::to_json(c.model);
  j["guidance"] = vidinsert::to_json(c.guidance);
  j["out"] = c.out ? nlohmann::json(c.out->string()) : nlohmann::json(nullptr);
  return j;
}

inline RunConfig load_run_config(const std::string& path) {
  RunConfig c;
  if (path.empty()) return c;
  const fs::path p(path);
  const nlohmann::json j = read_json_file(p);
  detail::reject_unknown_keys(j, {"checkpoint", "model", "guidance", "out"}, "run config");
  auto rel = [&](const std::string& s) {
    fs::path q(s);
    return q.is_relative() ? p.parent_path() / q : q;
  };
  if (j.contains("checkpoint") && !j.at("checkpoint").is_null()) {
    std::string s;
    detail::read_key(j, "checkpoint", s);
    c.checkpoint = rel(s);
  }
  if (j.contains("model")) {
    c.model = model_config_from_json(j.at("model"));
    c.model_given = true;
    c.channels_given = j.at("model").contains("channels");
  }
  if (j.contains("guidance")) c.guidance = guidance_from_json(j.at("guidance"));
  if (j.contains("out") && !j.at("out").is_null()) {
    std::string s;
    detail::read_key(j, "out", s);
    c.out = rel(s);
  }
  return c;
}

// Checkpoint when configured, otherwise deterministic random weights from
// the run seed. Without a checkpoint or explicit channel count the model
// adopts the data's channel count.
inline Weights<float> resolve_weights(RunConfig& rc, std::size_t channels) {
  if (rc.checkpoint) {
    Weights<float> w = load_checkpoint(*rc.checkpoint);
    rc.model = w.config;
    return w;
  }
  if (!rc.channels_given) rc.model.channels = channels;
  return init_weights<float>(rc.model, rc.guidance.seed);
}

// Space-to-depth factor implied by a 3 s^2 channel count.
inline std::size_t infer_scale(std::size_t channels) {
  for (std::size_t s = 1; 3 * s * s <= channels; ++s) {
    if (3 * s * s == channels) return s;
  }
  throw DimensionError("cannot decode latent with " + std::to_string(channels) +
                       " channels to RGB");
}

inline void write_report(const fs::path& path, const nlohmann::json& j) {
  write_json_file(path, j);
}

// Flags shared by insert / sample / reconstruct / ablate.
struct GuidanceFlags {
  std::uint64_t seed = 0;
  std::size_t steps = 50;
  double p_retain = 0.2;
  std::size_t refresh_stride = 1;
  bool disable_clone = false;
  bool disable_fusion = false;
  bool disable_refresh = false;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* steps_opt = nullptr;
  CLI::Option* p_opt = nullptr;
  CLI::Option* stride_opt = nullptr;

  void add_run_flags(CLI::App* app) {
    seed_opt = app->add_option("--seed", seed, "Run seed (noise, retention masks, random weights)");
    steps_opt = app->add_option("--steps", steps, "Number of Euler steps");
  }
  void add_guidance_flags(CLI::App* app) {
    p_opt = app->add_option("--p-retain", p_retain, "Retention probability p in [0,1]");
    stride_opt = app->add_option("--refresh-stride", refresh_stride,
                                 "Apply latent refresh every k steps");
    app->add_flag("--disable-clone", disable_clone, "Turn off attention value cloning");
    app->add_flag("--disable-fusion", disable_fusion,
                  "Clone without sparse fusion (p is ignored)");
    app->add_flag("--disable-refresh", disable_refresh, "Turn off latent refresh");
  }
  // Flag > config file > default.
  void apply(GuidanceConfig& g) const {
    if (seed_opt && seed_opt->count()) g.seed = seed;
    if (steps_opt && steps_opt->count()) g.steps = steps;
    if (p_opt && p_opt->count()) g.retention_p = p_retain;
    if (stride_opt && stride_opt->count()) g.refresh_stride = refresh_stride;
    if (disable_clone) g.clone_enabled = false;
    if (disable_fusion) g.fusion_enabled = false;
    if (disable_refresh) g.refresh_enabled = false;
    g.validate();
  }
};

inline void write_insert_outputs(const fs::path& out, const VideoLatent& output,
                                 const nlohmann::json& report, double seconds,
                                 bool dump_frames) {
  write_tensor(out / "output.vlt", output);
  write_report(out / "report.json", report);
  write_report(out / "timings.json", {{"wall_seconds", seconds}});
  if (dump_frames) {
    write_ppm_frames(out / "frames", decode(output, infer_scale(output.channels())),
                     "output");
  }
}

inline fs::path require_out(const std::string& flag, const RunConfig& rc) {
  if (!flag.empty()) return flag;
  if (rc.out) return *rc.out;
  throw InvalidArgument("no output location: pass --out or set 'out' in the config");
}

// Manifests of a bench directory: index.json when present, otherwise every
// */manifest.json in name order.
inline std::vector<fs::path> list_manifests(const fs::path& dir) {
  if (fs::exists(dir / "index.json")) return read_bench_index(dir / "index.json");
  if (!fs::is_directory(dir)) throw FormatError("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_directory() && fs::exists(e.path() / "manifest.json")) {
      out.push_back(e.path() / "manifest.json");
    }
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw FormatError("no case manifests under " + dir.string());
  return out;
}

struct NamedGuidance {
  std::string name;
  GuidanceConfig config;
};

// Expands --sweep axes into one-factor-at-a-time variants of `base`.
inline std::vector<NamedGuidance> expand_sweeps(const std::vector<std::string>& sweeps,
                                                const GuidanceConfig& base) {
  std::vector<NamedGuidance> out;
  auto add = [&](std::string name, GuidanceConfig g) {
    g.validate();
    for (const auto& e : out) {
      if (e.name == name) return;
    }
    out.push_back({std::move(name), g});
  };
  if (sweeps.empty()) add("base", base);
  for (const auto& s : sweeps) {
    if (s == "clone" || s == "fusion" || s == "refresh") {
      for (bool on : {true, false}) {
        GuidanceConfig g = base;
        if (s == "clone") g.clone_enabled = on;
        if (s == "fusion") g.fusion_enabled = on;
        if (s == "refresh") g.refresh_enabled = on;
        add(s + "=" + (on ? "on" : "off"), g);
      }
    } else if (s.rfind("p:", 0) == 0) {
      std::stringstream list(s.substr(2));
      std::string item;
      bool any = false;
      while (std::getline(list, item, ',')) {
        if (item.empty()) continue;
        GuidanceConfig g = base;
        std::size_t used = 0;
        try {
          g.retention_p = std::stod(item, &used);
        } catch (const std::exception&) {
          used = 0;
        }
        if (used != item.size()) throw InvalidArgument("bad p value in sweep: '" + item + "'");
        add("p=" + item, g);
        any = true;
      }
      if (!any) throw InvalidArgument("empty p list in sweep '" + s + "'");
    } else {
      throw InvalidArgument("unknown sweep '" + s + "' (clone, fusion, refresh, p:list)");
    }
  }
  return out;
}

inline MetricsReport evaluate_case(const VideoLatent& output, const JobManifest& m,
                                   const VideoLatent& source, const std::string& config) {
  check_same_shape(output.shape(), source.shape());
  const std::size_t s = infer_scale(source.channels());
  const RegionMask mask_px =
      m.mask_px ? read_mask(*m.mask_px, source.frames())
                : upscale_mask(read_mask(m.mask, source.frames()), s);
  const std::string id = m.case_id.empty() ? m.dir.filename().string() : m.case_id;
  return evaluate(decode(output, s), decode(source, s), mask_px, id, config);
}

class App {
 public:
  App() : app_("vidinsert: mask-guided object insertion into videos with a toy flow model") {
    app_.require_subcommand(1);
    app_.option_defaults()->always_capture_default();
    add_synth();
    add_train();
    add_insert();
    add_sample();
    add_reconstruct();
    add_eval();
    add_ablate();
  }

  int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::vector<const char*> argv;
    argv.push_back("vidinsert");
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
      app_.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
      out << app_.help();
      return kOk;
    } catch (const CLI::CallForAllHelp&) {
      out << app_.help("", CLI::AppFormatMode::All);
      return kOk;
    } catch (const CLI::ParseError& e) {
      // Subcommand --help lands here too.
      if (e.get_exit_code() == 0) {
        for (auto* sub : app_.get_subcommands()) out << sub->help();
        return kOk;
      }
      return fail(err, kUsage, "usage", e.what());
    }
    try {
      return (this->*action_)(out);
    } catch (const NumericError& e) {
      return fail(err, kNumeric, "numeric", e.what());
    } catch (const CacheError& e) {
      return fail(err, kNumeric, "cache", e.what());
    } catch (const InvalidArgument& e) {
      return fail(err, kUsage, "usage", e.what());
    } catch (const DimensionError& e) {
      return fail(err, kInput, "dimension", e.what());
    } catch (const FormatError& e) {
      return fail(err, kInput, "format", e.what());
    } catch (const Error& e) {
      return fail(err, kInput, "input", e.what());
    } catch (const fs::filesystem_error& e) {
      return fail(err, kInput, "io", e.what());
    } catch (const nlohmann::json::exception& e) {
      return fail(err, kInput, "format", e.what());
    }
  }

 private:
  static int fail(std::ostream& err, int code, const char* kind, std::string msg) {
    for (char& c : msg) {
      if (c == '\n' || c == '\r') c = ' ';
      if (c == '"') c = '\'';
    }
    err << "error: code=" << code << " kind=" << kind << " message=\"" << msg << "\"\n";
    return code;
  }

  void add_synth() {
    auto* s = app_.add_subcommand("synth", "Generate synthetic insertion cases");
    s->add_option("--spec", synth_spec_, "Scene template JSON (defaults when omitted)");
    s->add_option("--count", synth_count_, "Number of cases");
    s->add_option("--seed", synth_seed_, "Generation seed");
    s->add_option("--out", out_, "Output directory")->required();
    s->add_flag("--dump-frames", dump_frames_, "Also write PPM frames");
    s->callback([this] { action_ = &App::cmd_synth; });
  }

  void add_train() {
    auto* s = app_.add_subcommand("train", "Train the toy backbone by flow matching");
    s->add_option("--config", config_, "Training config JSON")->required();
    train_seed_opt_ = s->add_option("--seed", train_seed_, "Training seed");
    train_steps_opt_ = s->add_option("--steps", train_steps_, "Gradient steps");
    train_lr_opt_ = s->add_option("--step-size", train_lr_, "Gradient descent step size");
    train_ckpt_opt_ = s->add_option("--checkpoint", train_ckpt_, "Checkpoint output directory");
    s->callback([this] { action_ = &App::cmd_train; });
  }

  void add_insert() {
    auto* s = app_.add_subcommand("insert", "Insert the edited first frame's object into a video");
    s->add_option("--manifest", manifest_, "Job manifest JSON")->required();
    s->add_option("--config", config_, "Run config JSON");
    s->add_option("--checkpoint", checkpoint_, "Checkpoint directory (random weights if unset)");
    insert_flags_.add_run_flags(s);
    insert_flags_.add_guidance_flags(s);
    s->add_option("--out", out_, "Output directory");
    s->add_flag("--dump-frames", dump_frames_, "Also write decoded PPM frames");
    s->callback([this] { action_ = &App::cmd_insert; });
  }

  void add_sample() {
    auto* s = app_.add_subcommand("sample", "Unguided first-frame-conditioned sampling");
    s->add_option("--manifest", manifest_, "Job manifest JSON")->required();
    s->add_option("--config", config_, "Run config JSON");
    s->add_option("--checkpoint", checkpoint_, "Checkpoint directory (random weights if unset)");
    sample_flags_.add_run_flags(s);
    s->add_option("--out", out_, "Output directory");
    s->add_flag("--dump-frames", dump_frames_, "Also write decoded PPM frames");
    s->callback([this] { action_ = &App::cmd_sample; });
  }

  void add_reconstruct() {
    auto* s = app_.add_subcommand("reconstruct", "Run the reconstruction path alone");
    s->add_option("--source", source_, "Source latent tensor (VLT1)")->required();
    s->add_option("--config", config_, "Run config JSON");
    s->add_option("--checkpoint", checkpoint_, "Checkpoint directory (random weights if unset)");
    s->add_option("--prompt", prompt_, "Conditioning prompt");
    recon_flags_.add_run_flags(s);
    s->add_option("--out", out_, "Output directory");
    s->callback([this] { action_ = &App::cmd_reconstruct; });
  }

  void add_eval() {
    auto* s = app_.add_subcommand("eval", "Background-masked metrics for one output");
    s->add_option("--output", output_, "Output latent tensor (VLT1)")->required();
    s->add_option("--case", manifest_, "Case manifest JSON")->required();
    s->add_option("--report", report_, "Report JSON path")->required();
    s->add_option("--name", config_name_, "Config label stored in the report");
    s->callback([this] { action_ = &App::cmd_eval; });
  }

  void add_ablate() {
    auto* s = app_.add_subcommand("ablate", "Sweep guidance toggles over a set of cases");
    s->add_option("--manifest-dir", manifest_dir_, "Directory of cases")->required();
    s->add_option("--base-config", config_, "Run config JSON for the base settings");
    s->add_option("--checkpoint", checkpoint_, "Checkpoint directory (random weights if unset)");
    s->add_option("--sweep", sweeps_, "Axes: clone, fusion, refresh, p:<v1,v2,...>");
    ablate_flags_.add_run_flags(s);
    s->add_option("--max-cases", max_cases_, "Use at most this many cases (0 = all)");
    s->add_option("--report", report_, "Report JSON path (a .txt table is written beside it)")
        ->required();
    s->add_option("--out", out_, "Directory for per-case outputs (optional)");
    s->callback([this] { action_ = &App::cmd_ablate; });
  }

  RunConfig run_config() const {
    RunConfig rc = load_run_config(config_);
    if (!checkpoint_.empty()) rc.checkpoint = fs::path(checkpoint_);
    return rc;
  }

  int cmd_synth(std::ostream& out) {
    SynthTemplate tpl;
    if (!synth_spec_.empty()) tpl = synth_template_from_json(read_json_file(synth_spec_));
    if (synth_count_ == 0) throw InvalidArgument("--count must be >= 1");
    const auto manifests = synthesize(tpl, synth_count_, synth_seed_, out_, dump_frames_);
    out << "wrote " << manifests.size() << " cases to " << out_ << "\n";
    return kOk;
  }

  int cmd_train(std::ostream& out) {
    const fs::path p(config_);
    TrainConfig c = train_config_from_json(read_json_file(p), p.parent_path());
    if (train_seed_opt_->count()) c.seed = train_seed_;
    if (train_steps_opt_->count()) c.steps = train_steps_;
    if (train_lr_opt_->count()) c.step_size = train_lr_;
    if (train_ckpt_opt_->count()) c.checkpoint = train_ckpt_;
    c.validate();
    if (c.dataset.empty()) throw InvalidArgument("train config needs 'dataset'");
    if (c.checkpoint.empty()) throw InvalidArgument("train config needs 'checkpoint'");
    const TrainResult r = train(c);
    out << "trained " << c.steps << " steps; eval loss " << r.trace.eval_initial << " -> "
        << r.trace.eval_final << "; checkpoint " << c.checkpoint << "\n";
    return kOk;
  }

  struct Prepared {
    RunConfig rc;
    Weights<float> weights;
    InsertJob job;
    JobManifest manifest;
  };

  Prepared prepare_job(bool guided) {
    Prepared p;
    p.rc = run_config();
    p.manifest = read_job_manifest(manifest_);
    GuidanceConfig g = guidance_from_json(p.manifest.guidance, p.rc.guidance);
    if (guided) {
      insert_flags_.apply(g);
    } else {
      sample_flags_.apply(g);
    }
    p.rc.guidance = g;
    p.job = load_job(p.manifest, g);
    p.weights = resolve_weights(p.rc, p.job.source.channels());
    return p;
  }

  int cmd_insert(std::ostream& out) {
    Prepared p = prepare_job(true);
    const fs::path dir = require_out(out_, p.rc);
    p.rc.out = dir;
    const RunArtifacts art = run_insert(p.weights, p.job);
    nlohmann::json report = art.report();
    report["command"] = "insert";
    report["manifest"] = manifest_;
    report["run_config"] = to_json(p.rc);
    write_insert_outputs(dir, art.output, report, art.wall_seconds, dump_frames_);
    out << "insert: " << art.drift.size() << " steps, final background drift "
        << art.drift.back() << ", wrote " << (dir / "output.vlt") << "\n";
    return kOk;
  }

  int cmd_sample(std::ostream& out) {
    Prepared p = prepare_job(false);
    const fs::path dir = require_out(out_, p.rc);
    p.rc.out = dir;
    const auto t0 = std::chrono::steady_clock::now();
    const VideoLatent video = sample_unguided(p.weights, p.job);
    nlohmann::json report = {{"command", "sample"},
                             {"manifest", manifest_},
                             {"seed", p.rc.guidance.seed},
                             {"steps", p.rc.guidance.steps},
                             {"run_config", to_json(p.rc)}};
    write_insert_outputs(dir, video, report, detail::seconds_since(t0), dump_frames_);
    out << "sample: wrote " << (dir / "output.vlt") << "\n";
    return kOk;
  }

  int cmd_reconstruct(std::ostream& out) {
    RunConfig rc = run_config();
    GuidanceConfig g = rc.guidance;
    recon_flags_.apply(g);
    rc.guidance = g;
    const VideoLatent source = read_tensor(source_);
    const Weights<float> w = resolve_weights(rc, source.channels());
    const fs::path dir = require_out(out_, rc);
    rc.out = dir;
    const RunArtifacts art = run_reconstruct(w, source, prompt_, g);
    nlohmann::json report = art.report();
    report["command"] = "reconstruct";
    report["source"] = source_;
    report["run_config"] = to_json(rc);
    report["bitwise_equal_source"] = art.output.bitwise_equal(source);
    write_tensor(dir / "output.vlt", art.output);
    write_report(dir / "report.json", report);
    write_report(dir / "timings.json", {{"wall_seconds", art.wall_seconds}});
    out << "reconstruct: " << (art.output.bitwise_equal(source) ? "exact" : "MISMATCH")
        << ", wrote " << (dir / "output.vlt") << "\n";
    return kOk;
  }

  int cmd_eval(std::ostream& out) {
    const JobManifest m = read_job_manifest(manifest_);
    const VideoLatent output = read_tensor(output_);
    const VideoLatent source = read_tensor(m.source);
    const MetricsReport r = evaluate_case(output, m, source, config_name_);
    write_report(report_, vidinsert::to_json(r));
    out << "eval " << r.case_id << ": psnr " << r.psnr_db << " dB"
        << (r.psnr_exact ? " (exact)" : "") << ", ssim " << r.ssim << "\n";
    return kOk;
  }

  int cmd_ablate(std::ostream& out) {
    RunConfig rc = run_config();
    GuidanceConfig base = rc.guidance;
    ablate_flags_.apply(base);
    rc.guidance = base;
    const std::vector<NamedGuidance> variants = expand_sweeps(sweeps_, base);
    std::vector<fs::path> manifests = list_manifests(manifest_dir_);
    if (max_cases_ > 0 && manifests.size() > max_cases_) manifests.resize(max_cases_);

    std::vector<MetricsReport> reports;
    std::optional<Weights<float>> weights;
    for (const auto& mpath : manifests) {
      const JobManifest m = read_job_manifest(mpath);
      for (const auto& v : variants) {
        const InsertJob job = load_job(m, v.config);
        if (!weights) weights = resolve_weights(rc, job.source.channels());
        const RunArtifacts art = run_insert(*weights, job);
        MetricsReport r = evaluate_case(art.output, m, job.source, v.name);
        if (!out_.empty()) {
          const fs::path d = fs::path(out_) / r.case_id / v.name;
          nlohmann::json report = art.report();
          report["command"] = "ablate";
          report["manifest"] = mpath.string();
          write_insert_outputs(d, art.output, report, art.wall_seconds, false);
        }
        reports.push_back(std::move(r));
      }
    }
    const AblationTable table = assemble_report(reports);
    nlohmann::json j = vidinsert::to_json(table);
    j["run_config"] = to_json(rc);
    nlohmann::json vj = nlohmann::json::array();
    for (const auto& v : variants) vj.push_back({{"name", v.name}, {"guidance", vidinsert::to_json(v.config)}});
    j["variants"] = vj;
    write_report(report_, j);
    fs::path txt(report_);
    txt.replace_extension(".txt");
    const std::string text = format_table(table);
    write_file_text(txt, text);
    out << text;
    return kOk;
  }

  static void write_file_text(const fs::path& p, const std::string& s) {
    write_file_bytes(p, std::vector<unsigned char>(s.begin(), s.end()));
  }

  CLI::App app_;
  int (App::*action_)(std::ostream&) = nullptr;

  std::string config_, manifest_, manifest_dir_, out_, source_, output_, report_;
  std::string checkpoint_, prompt_, synth_spec_;
  std::string config_name_ = "run";
  std::vector<std::string> sweeps_;
  std::size_t synth_count_ = 20;
  std::uint64_t synth_seed_ = 0;
  std::size_t max_cases_ = 0;
  bool dump_frames_ = false;
  GuidanceFlags insert_flags_, sample_flags_, recon_flags_, ablate_flags_;

  std::uint64_t train_seed_ = 0;
  std::size_t train_steps_ = 200;
  double train_lr_ = 0.1;
  std::string train_ckpt_;
  CLI::Option* train_seed_opt_ = nullptr;
  CLI::Option* train_steps_opt_ = nullptr;
  CLI::Option* train_lr_opt_ = nullptr;
  CLI::Option* train_ckpt_opt_ = nullptr;
};

// Runs one command line (without the program name).
inline int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  App app;
  return app.run(args, out, err);
}

}  // namespace vidinsert::cli

#endif  // VIDINSERT_TOOLS_CLI_APP_HPP_
