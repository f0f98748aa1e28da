// Copyright 2026 The marsim Authors
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

// simrun: validate, run, batch and serve scenarios; thruster response sweeps.
// Exit codes: 0 success, 1 validation failure, 2 runtime failure.

#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "marsim/sim/env_server.hpp"
#include "marsim/sim/runner.hpp"

extern char** environ;

namespace {

namespace fs = std::filesystem;
using namespace marsim;
using namespace marsim::sim;

constexpr int kOk = 0;
constexpr int kValidation = 1;
constexpr int kRuntime = 2;

void print_validation(const ValidationError& e) { std::cerr << e.what() << '\n'; }

/// Runs `body`, mapping exceptions onto exit codes.
template <typename F>
int guarded(F&& body) {
  try {
    return body();
  } catch (const ValidationError& e) {
    print_validation(e);
    return kValidation;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
}

int cmd_validate(const std::string& config) {
  return guarded([&] {
    const auto cfg = load_scenario(config);
    std::cout << config << ": ok (" << cfg.tick_count() + 1 << " ticks, " << cfg.sensors.size() << " sensors)\n";
    return kOk;
  });
}

int cmd_run(const std::string& config, const std::string& out, const RunOptions& opts) {
  return guarded([&] {
    auto cfg = load_scenario(config);
    apply_overrides(cfg, opts);
    const auto manifest = run_scenario(cfg, out);
    for (const auto& [name, frames] : manifest.frame_counts) std::cout << name << ": " << frames << " frames\n";
    return kOk;
  });
}

std::string self_exe() {
  std::error_code ec;
  const auto p = fs::read_symlink("/proc/self/exe", ec);
  return ec ? std::string("simrun") : p.string();
}

pid_t spawn(const std::vector<std::string>& argv) {
  std::vector<char*> args;
  for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);
  pid_t pid = 0;
  if (posix_spawn(&pid, args[0], nullptr, nullptr, args.data(), environ) != 0) return -1;
  return pid;
}

/// Each config runs in its own process, writing to `<root>/<config stem>`.
int cmd_batch(const std::vector<std::string>& configs, int jobs, const std::string& root, const RunOptions& opts) {
  if (jobs < 1) {
    std::cerr << "error: --jobs must be >= 1\n";
    return kValidation;
  }
  std::set<std::string> stems;
  for (const auto& c : configs) {
    if (!stems.insert(fs::path(c).stem().string()).second) {
      std::cerr << "error: two configs share the output name '" << fs::path(c).stem().string() << "'\n";
      return kValidation;
    }
  }
  const std::string exe = self_exe();
  std::deque<std::size_t> pending;
  for (std::size_t i = 0; i < configs.size(); ++i) pending.push_back(i);
  std::map<pid_t, std::size_t> running;
  int worst = kOk;
  auto reap = [&] {
    int status = 0;
    const pid_t pid = ::waitpid(-1, &status, 0);
    if (pid < 0) return;
    const std::size_t i = running.at(pid);
    running.erase(pid);
    const int code = WIFEXITED(status) ? WEXITSTATUS(status) : kRuntime;
    if (code != kOk) std::cerr << configs[i] << ": exit " << code << '\n';
    worst = std::max(worst, code == kValidation ? kValidation : (code == kOk ? kOk : kRuntime));
  };
  while (!pending.empty() || !running.empty()) {
    while (!pending.empty() && static_cast<int>(running.size()) < jobs) {
      const std::size_t i = pending.front();
      pending.pop_front();
      std::vector<std::string> argv{exe, "run", configs[i], "--out", (fs::path(root) / fs::path(configs[i]).stem()).string()};
      if (opts.seed) { argv.push_back("--seed"); argv.push_back(std::to_string(*opts.seed)); }
      if (opts.duration) { argv.push_back("--duration"); argv.push_back(sim::detail::format_g(*opts.duration)); }
      const pid_t pid = spawn(argv);
      if (pid < 0) {
        std::cerr << configs[i] << ": cannot start worker\n";
        worst = kRuntime;
        continue;
      }
      running[pid] = i;
    }
    if (!running.empty()) reap();
  }
  return worst;
}

int cmd_serve(const std::string& config, const std::string& listen) {
  return guarded([&] {
    Environment env(load_scenario(config));
    Listener listener(ListenAddress::parse(listen));
    std::cout << "listening on " << listener.address().to_string() << std::endl;
    serve(env, listener);
    return kOk;
  });
}

std::string read_text_or_inline(const std::string& arg) {
  const auto first = arg.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && arg[first] == '{') return arg;
  std::ifstream in(arg, std::ios::binary);
  if (!in) throw ValidationError(arg, {Diagnostic{"", {}, "cannot read file"}});
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct ResponseArgs {
  std::string model;
  std::optional<double> input;
  double dt = 1e-3;
  double duration = 1.0;
  double advance = 0.0;
  std::string out;
};

int cmd_thruster_response(const ResponseArgs& a) {
  return guarded([&] {
    const std::string text = read_text_or_inline(a.model);
    const bool inline_model = text == a.model;
    const std::string source = inline_model ? "<model>" : a.model;
    Json j;
    try {
      j = Json::parse(text);
    } catch (const Json::parse_error& e) {
      throw ValidationError(source, {Diagnostic{"", {}, e.what()}});
    }
    const JsonLocator locator(text);
    sim::detail::Reader r(locator);
    ScenarioConfig empty;
    if (!j.is_object()) r.error("", "thruster model must be a JSON object");
    ThrusterSpec spec;
    if (r.diagnostics.empty()) {
      if (!j.contains("name")) j["name"] = "thruster";
      spec = parse_thruster(r, j, "", empty, inline_model ? fs::path(".") : fs::path(a.model).parent_path());
    }
    if (!(a.dt > 0.0) || !std::isfinite(a.dt)) r.error("/dt", "--dt must be > 0");
    if (!(a.duration >= 0.0) || !std::isfinite(a.duration)) r.error("/duration", "--duration must be >= 0");
    if (!std::isfinite(a.advance)) r.error("/advance", "--advance must be finite");
    if (a.input && !std::isfinite(*a.input)) r.error("/input", "--input must be finite");
    if (!r.diagnostics.empty()) throw ValidationError(source, r.diagnostics);
    if (a.input) spec.schedule = {{0.0, *a.input}};

    thruster::Thruster th(spec.rotor, spec.generation);
    std::ofstream file;
    if (!a.out.empty()) {
      file.open(a.out, std::ios::binary);
      if (!file) throw io::IoError("cannot open '" + a.out + "' for writing");
    }
    std::ostream& out = a.out.empty() ? std::cout : file;
    const auto steps = static_cast<std::int64_t>(std::floor(a.duration / a.dt + 1e-9));
    auto row = [&](double t, double input) {
      out << sim::detail::format_g(t) << ',' << sim::detail::format_g(input) << ',' << sim::detail::format_g(th.state().omega) << ','
          << sim::detail::format_g(th.thrust()) << ',' << sim::detail::format_g(th.state().torque) << '\n';
    };
    out << "t,input,omega,thrust,torque\n";
    double input = spec.input_at(0.0);
    row(0.0, input);
    for (std::int64_t k = 1; k <= steps; ++k) {
      input = spec.input_at(static_cast<double>(k - 1) * a.dt);
      th.step(input, a.advance, a.dt);
      row(static_cast<double>(k) * a.dt, input);
    }
    out.flush();
    if (!out) throw io::IoError("write failed");
    return kOk;
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Headless marine sensor and actuator simulation"};
  app.require_subcommand(1);

  std::string config, out = "out", listen;
  std::vector<std::string> configs;
  std::optional<std::uint64_t> seed;
  std::optional<double> duration;
  int jobs = 1;
  ResponseArgs resp;

  auto* validate = app.add_subcommand("validate", "Check a scenario and report every problem");
  validate->add_option("config", config, "Scenario JSON")->required();

  auto* run = app.add_subcommand("run", "Run a scenario to an output directory");
  run->add_option("config", config, "Scenario JSON")->required();
  run->add_option("--out", out, "Output directory")->required();
  run->add_option("--seed", seed, "Override the scenario seed");
  run->add_option("--duration", duration, "Override the duration in seconds");

  auto* batch = app.add_subcommand("batch", "Run several scenarios as parallel processes");
  batch->add_option("configs", configs, "Scenario JSON files")->required();
  batch->add_option("--jobs,-j", jobs, "Concurrent processes");
  batch->add_option("--out", out, "Output root; each run goes to <out>/<config stem>");
  batch->add_option("--seed", seed, "Override every scenario seed");
  batch->add_option("--duration", duration, "Override every duration");

  auto* serve_cmd = app.add_subcommand("serve", "Expose the scenario as a step/reset environment");
  serve_cmd->add_option("config", config, "Scenario JSON with an environment block")->required();
  serve_cmd->add_option("--listen", listen, "unix:<path> or tcp:<host>:<port>")->required();

  auto* response = app.add_subcommand("thruster-response", "Time series of one thruster model");
  response->add_option("--model", resp.model, "Thruster JSON (inline or file)")->required();
  response->add_option("--input", resp.input, "Constant input, overrides the model schedule");
  response->add_option("--dt", resp.dt, "Step in seconds");
  response->add_option("--duration", resp.duration, "Length in seconds");
  response->add_option("--advance", resp.advance, "Advance velocity in m/s");
  response->add_option("--out", resp.out, "CSV path (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  const RunOptions opts{seed, duration};
  if (*validate) return cmd_validate(config);
  if (*run) return cmd_run(config, out, opts);
  if (*batch) return cmd_batch(configs, jobs, out, opts);
  if (*serve_cmd) return cmd_serve(config, listen);
  if (*response) return cmd_thruster_response(resp);
  return kValidation;
}
