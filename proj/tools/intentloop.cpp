// Copyright 2026 The intentloop Authors
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

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "intentloop/bench.hpp"
#include "intentloop/calibrate.hpp"
#include "intentloop/service.hpp"

namespace {

using namespace intentloop;

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  for (std::string item; std::getline(in, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::InvalidConfig, "cannot write " + path);
  out << text;
}

Presets load_presets(const std::string& path) { return path.empty() ? Presets::zero() : Presets::load(path); }

httplib::Server* running_server = nullptr;

void stop_server(int) {
  if (running_server) running_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"intentloop: iterative refinement of layout-conditioned scene generation"};
  app.require_subcommand(1);

  // bench
  auto* bench = app.add_subcommand("bench", "Run the three-task benchmark");
  std::string tasks = "numeracy,attribute,spatial", arms = "unconditioned,conditioned,refined";
  std::string bench_presets, bench_out, bench_table, bench_csv;
  std::size_t bench_n = 100;
  std::uint64_t bench_seed = 42;
  unsigned bench_jobs = 1;
  bench->add_option("--tasks", tasks, "Comma-separated tasks")->capture_default_str();
  bench->add_option("--n", bench_n, "Prompts per task")->capture_default_str();
  bench->add_option("--seed", bench_seed, "Corpus and generation seed")->capture_default_str();
  bench->add_option("--arms", arms, "Comma-separated arms")->capture_default_str();
  bench->add_option("--presets", bench_presets, "Presets TOML (default: error-free presets)");
  bench->add_option("--out", bench_out, "Write the JSON report here");
  bench->add_option("--table", bench_table, "Write the markdown table here");
  bench->add_option("--csv", bench_csv, "Write the CSV report here");
  bench->add_option("--jobs", bench_jobs, "Worker threads")->capture_default_str();

  // serve
  auto* serve = app.add_subcommand("serve", "Serve the session API");
  int port = 8080;
  std::string host = "127.0.0.1", store = "./sessions", serve_presets = "presets.toml", static_dir = "web";
  std::uint64_t serve_seed = 0;
  serve->add_option("--port", port)->capture_default_str();
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--store", store, "Session store directory")->capture_default_str();
  serve->add_option("--presets", serve_presets)->capture_default_str();
  serve->add_option("--static", static_dir, "Directory served under /")->capture_default_str();
  serve->add_option("--seed", serve_seed, "Seed for default session seeds")->capture_default_str();

  // run
  auto* run = app.add_subcommand("run", "Run the refinement loop on one prompt");
  std::string run_prompt, run_preset = "refined", run_presets, run_out = "trace.json";
  std::uint64_t run_seed = 0;
  bool run_knowledge = false;
  run->add_option("prompt", run_prompt, "Prompt text")->required();
  run->add_option("--preset", run_preset)->capture_default_str();
  run->add_option("--presets", run_presets, "Presets TOML (default: error-free presets)");
  run->add_option("--seed", run_seed)->capture_default_str();
  run->add_option("--out", run_out, "Trace output path ('-' for stdout)")->capture_default_str();
  run->add_flag("--knowledge", run_knowledge, "Enable knowledge-based fidelity feedback");

  // parse
  auto* parse = app.add_subcommand("parse", "Parse a prompt and print its scene spec");
  std::string parse_text;
  parse->add_option("prompt", parse_text)->required();

  // calibrate
  auto* cal = app.add_subcommand("calibrate", "Fit presets to benchmark accuracy targets");
  CalibrationOptions opts;
  std::string cal_out = "presets.toml";
  std::vector<double> t_u{0.39, 0.52, 0.28}, t_c{0.65, 0.73, 0.72}, t_r{0.83, 0.82, 0.86};
  cal->add_option("--out", cal_out)->capture_default_str();
  cal->add_option("--n", opts.n_prompts, "Prompts per task per candidate")->capture_default_str();
  cal->add_option("--seed", opts.seed)->capture_default_str();
  cal->add_option("--tol", opts.tol)->capture_default_str();
  cal->add_option("--detector-tol", opts.detector_tol)->capture_default_str();
  cal->add_option("--budget", opts.budget, "Candidate evaluations per stage")->capture_default_str();
  cal->add_option("--jobs", opts.jobs)->capture_default_str();
  cal->add_option("--unconditioned", t_u, "Targets numeracy attribute spatial")->expected(3);
  cal->add_option("--conditioned", t_c)->expected(3);
  cal->add_option("--refined", t_r)->expected(3);

  CLI11_PARSE(app, argc, argv);

  try {
    const auto& vocab = Vocabulary::builtin();
    if (*bench) {
      BenchConfig cfg;
      cfg.tasks.clear();
      for (const auto& t : split_csv(tasks)) cfg.tasks.push_back(task_from_string(t));
      cfg.arms.clear();
      for (const auto& a : split_csv(arms)) cfg.arms.push_back(arm_from_string(a));
      cfg.n_prompts = bench_n;
      cfg.seed = bench_seed;
      cfg.presets = load_presets(bench_presets);
      cfg.jobs = bench_jobs;
      const auto result = run_benchmark(cfg, vocab);
      const auto table = emit_report(result, ReportFormat::md);
      if (!bench_out.empty()) write_file(bench_out, emit_report(result, ReportFormat::json));
      if (!bench_table.empty()) write_file(bench_table, table);
      if (!bench_csv.empty()) write_file(bench_csv, emit_report(result, ReportFormat::csv));
      std::cout << table;
    } else if (*serve) {
      SessionService service(Presets::load(serve_presets), store, serve_seed, vocab);
      httplib::Server server;
      install_routes(server, service, static_dir);
      running_server = &server;
      std::signal(SIGINT, stop_server);
      std::signal(SIGTERM, stop_server);
      std::cerr << "listening on http://" << host << ":" << port << "\n";
      if (!server.listen(host, port)) {
        std::cerr << "cannot listen on " << host << ":" << port << "\n";
        return 1;
      }
    } else if (*run) {
      const Presets presets = load_presets(run_presets);
      RefinementConfig cfg;
      cfg.generator = presets.generator(run_preset);
      cfg.detector = presets.detector(run_preset);
      cfg.max_iterations = presets.max_iterations;
      if (run_knowledge) cfg.knowledge = DefaultsTable::builtin();
      SessionTrace trace;
      int status = 0;
      try {
        trace = run_refinement(run_prompt, cfg, run_seed, vocab);
      } catch (const RefinementError& e) {
        std::cerr << nlohmann::json(e.to_json()).dump() << "\n";
        trace = e.partial_trace();
        status = 2;
      }
      const std::string text = nlohmann::json(trace).dump(2) + "\n";
      if (run_out == "-") std::cout << text;
      else write_file(run_out, text);
      return status;
    } else if (*parse) {
      const auto spec = parse_prompt(parse_text, vocab);
      nlohmann::json out{{"canonical", spec_to_canonical_text(spec, vocab)}, {"spec", spec}};
      std::cout << out.dump(2) << "\n";
    } else if (*cal) {
      const auto report = calibrate_presets({t_u[0], t_u[1], t_u[2]}, {t_c[0], t_c[1], t_c[2]},
                                            {t_r[0], t_r[1], t_r[2]}, opts, vocab);
      std::ostringstream text;
      std::istringstream lines(report.decomposition);
      for (std::string line; std::getline(lines, line);) text << "# " << line << "\n";
      text << "\n" << report.presets.to_toml();
      write_file(cal_out, text.str());
      std::cout << report.decomposition;
    }
  } catch (const Error& e) {
    std::cerr << e.to_json().dump() << "\n";
    return 1;
  }
  return 0;
}
