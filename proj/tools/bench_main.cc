// Copyright 2026 The tiermem Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// bench: runs scenario files and the built-in experiments, or serves a
// peer over TCP.

#include <atomic>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "tiermem/config.h"
#include "tiermem/experiments.h"
#include "tiermem/remote_store.h"
#include "tiermem/simulation.h"
#include "tiermem/socket_transport.h"

namespace {

std::atomic<bool> g_stop{false};

void OnSignal(int) { g_stop = true; }

int RunCommand(const std::string& path, const std::vector<std::string>& sets,
               const std::string& out_dir) {
  tiermem::Config config = tiermem::Config::Load(path);
  for (const std::string& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw tiermem::ConfigError("--set expects key=value, got '" + kv + "'");
    }
    config.Set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  const tiermem::ScenarioConfig scenario = tiermem::ScenarioFromConfig(config);
  const tiermem::ScenarioResult result = tiermem::RunScenario(scenario);
  tiermem::WriteScenarioOutputs(scenario, result, config.Canonical(), out_dir);
  const auto& r = result.report;
  std::cout << scenario.name << ": " << r.ops << " ops, throughput "
            << tiermem::FormatDouble(r.throughput) << " ops/s, mean latency "
            << tiermem::FormatDouble(r.mean_latency) << ", p99 "
            << r.p99_latency << ", local hit ratio "
            << tiermem::FormatDouble(r.local_hit_ratio()) << "\n"
            << "outputs in " << out_dir << "\n";
  if (!result.ok()) {
    std::cerr << "invariant violated: mismatches=" << r.mismatches
              << " critical_path_violations="
              << result.critical_path_violations
              << " lost_pages=" << result.census.lost << "\n";
    return 2;
  }
  return 0;
}

int ExperimentCommand(const std::string& name, uint64_t seed, double scale,
                      const std::string& out_dir) {
  tiermem::ExperimentOptions options;
  options.seed = seed;
  options.scale = scale;
  const tiermem::ExperimentResult result =
      tiermem::RunExperiment(name, options);
  tiermem::WriteExperimentOutputs(result, out_dir);
  std::cout << result.Summary();
  return result.ok() ? 0 : 2;
}

int PeerCommand(uint16_t port, uint64_t total_mb, uint64_t slab_kb) {
  tiermem::Peer peer(tiermem::PeerId{0},
                     tiermem::PeerConfig{.total_bytes = total_mb << 20,
                                         .slab_bytes = slab_kb << 10});
  tiermem::PeerServer server(peer, port);
  server.Start();
  std::cout << "peer listening on 127.0.0.1:" << server.port() << std::endl;
  std::signal(SIGINT, OnSignal);
  std::signal(SIGTERM, OnSignal);
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server.Stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tiered memory engine benchmark harness"};
  app.require_subcommand(1);

  std::string config_path;
  std::string run_out = "out";
  auto* run = app.add_subcommand("run", "run a scenario config file");
  run->add_option("config", config_path, "scenario file")
      ->required()
      ->check(CLI::ExistingFile);
  run->add_option("--out", run_out, "output directory");
  std::vector<std::string> run_sets;
  run->add_option("--set", run_sets, "override a config key (key=value)");

  std::string name;
  uint64_t seed = 1;
  double scale = 1.0;
  std::string exp_out;
  auto* exp = app.add_subcommand("experiment", "run a built-in experiment");
  exp->add_option("name", name, "experiment name")
      ->required()
      ->check(CLI::IsMember(tiermem::ExperimentNames()));
  exp->add_option("--seed", seed, "random seed");
  exp->add_option("--scale", scale, "query count multiplier")
      ->check(CLI::PositiveNumber);
  exp->add_option("--out", exp_out, "output directory (default out/<name>)");

  uint16_t port = 0;
  uint64_t total_mb = 1024;
  uint64_t slab_kb = 4096;
  auto* peer = app.add_subcommand("peer", "serve one peer over TCP");
  peer->add_option("--port", port, "listen port (0 picks one)");
  peer->add_option("--total-mb", total_mb, "memory donated by the peer");
  peer->add_option("--slab-kb", slab_kb, "block size");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return RunCommand(config_path, run_sets, run_out);
    if (*exp) {
      return ExperimentCommand(name, seed, scale,
                               exp_out.empty() ? "out/" + name : exp_out);
    }
    if (*peer) return PeerCommand(port, total_mb, slab_kb);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
