#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "designbridge/error.hpp"
#include "designbridge/gateway.hpp"
#include "designbridge/simulation.hpp"

namespace db = designbridge;

namespace {

db::HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw db::Error(db::ErrorCode::StorageFull, "cannot write " + path.string());
}

int run_serve(const std::string& data_dir, const std::string& host, int port, const std::string& mode,
              std::uint64_t seed, int max_rounds, const std::string& token) {
  db::GatewayConfig config;
  if (!data_dir.empty()) config.data_dir = data_dir;
  config.mode = db::backend_mode_from_name(mode);
  config.default_seed = seed;
  config.max_rounds = max_rounds;
  if (!token.empty()) config.token = token;
  db::Gateway gateway(config);
  db::HttpServer server(gateway);
  const int bound = port == 0 ? server.bind_any_port(host) : (server.bind(host, port) ? port : -1);
  if (bound < 0) {
    fmt::print(stderr, "cannot bind {}:{}\n", host, port);
    return 1;
  }
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  fmt::print("listening on http://{}:{}\n", host, bound);
  std::fflush(stdout);
  server.listen_after_bind();
  g_server = nullptr;
  return 0;
}

int run_simulate(db::sim::SimulationConfig config, const std::string& strategy, const std::string& out_dir) {
  if (strategy == "entropy") {
    config.strategies = {db::Strategy::Entropy};
  } else if (strategy == "random") {
    config.strategies = {db::Strategy::Random};
  } else {
    config.strategies = {db::Strategy::Entropy, db::Strategy::Random};
  }
  const auto result = db::sim::simulate(config);
  const auto& space = db::DesignSpace::canonical();
  const std::filesystem::path dir(out_dir);
  write_text(dir / "metrics.csv", result.rounds_csv());
  write_text(dir / "consensus.csv", result.consensus_csv(space));
  if (!result.comparison.empty()) write_text(dir / "comparison.csv", result.comparison_csv());
  for (auto s : config.strategies) {
    fmt::print("{} mean final held-out AUC: {:.4f}\n", db::strategy_name(s), result.mean_final_auc(s));
  }
  fmt::print("wrote {}\n", dir.string());
  return 0;
}

int run_replay(const std::string& path, bool as_json) {
  if (!std::filesystem::exists(path)) throw db::Error(db::ErrorCode::NotFound, "no such log: " + path);
  const auto scan = db::scan_log(path);
  const auto project = db::replay(db::DesignSpace::canonical(), scan.events);
  const nlohmann::json summary = {{"log_offset", project.log_offset()},
                                  {"state_hash", project.state_hash()},
                                  {"torn_tail", scan.torn_tail},
                                  {"project_id", project.config().project_id},
                                  {"library_size", project.catalog().live_count()},
                                  {"interactions", project.interactions().records().size()},
                                  {"sessions", project.sessions().size()},
                                  {"users", project.users()}};
  if (as_json) {
    fmt::print("{}\n", summary.dump(2));
  } else {
    fmt::print("events       {}\n", project.log_offset());
    fmt::print("state hash   {}\n", project.state_hash());
    fmt::print("library      {} items\n", project.catalog().live_count());
    fmt::print("interactions {}\n", project.interactions().records().size());
    fmt::print("sessions     {}\n", project.sessions().size());
    if (scan.torn_tail) fmt::print("note: ignored a torn final line\n");
  }
  return 0;
}

int run_report(const std::string& data_dir, const std::string& project_id, const std::string& out_dir) {
  db::GatewayConfig config;
  config.data_dir = data_dir;
  db::Gateway gateway(config);
  const auto& space = gateway.space();
  const auto report = gateway.consensus(project_id);
  const std::filesystem::path dir(out_dir);
  write_text(dir / "consensus_report.json", report.dump(2) + "\n");

  std::string csv = "dimension,attribute,acs_raw,acs_norm\n";
  for (int i = 0; i < db::kAttributeCount; ++i) {
    const auto id = space.from_flat(i);
    csv += fmt::format("{},{},{:.12g},{:.12g}\n", db::sim::csv_field(space.dimension(id.dimension).name),
                       db::sim::csv_field(space.attribute_name(id)), report["acs_raw"][static_cast<std::size_t>(i)].get<double>(),
                       report["acs_norm"][static_cast<std::size_t>(i)].get<double>());
  }
  write_text(dir / "consensus.csv", csv);

  nlohmann::json bundles = nlohmann::json::array();
  std::string attr_csv = "item_id,user_id,dimension,phi\n";
  const auto library = gateway.library(project_id);
  std::vector<std::string> ids;
  for (const auto& item : library["items"]) ids.push_back(item["item_id"].get<std::string>());
  for (const auto& item : library["staged"]) ids.push_back(item["item_id"].get<std::string>());
  for (const auto& id : ids) {
    const auto a = gateway.attribution(project_id, id);
    if (a["attribution"].is_null()) continue;
    bundles.push_back(a);
    for (const auto& u : a["attribution"]["per_user"]) {
      for (int d = 0; d < db::kDimensionCount; ++d) {
        attr_csv += fmt::format("{},{},{},{:.12g}\n", db::sim::csv_field(id), db::sim::csv_field(u["user_id"].get<std::string>()),
                                db::sim::csv_field(space.dimension(d).name), u["phi"][static_cast<std::size_t>(d)].get<double>());
      }
    }
  }
  write_text(dir / "attribution_report.json", bundles.dump(2) + "\n");
  write_text(dir / "attribution.csv", attr_csv);
  fmt::print("users {}, attributed items {}, wrote {}\n", report["n"].get<int>(), bundles.size(), dir.string());
  return 0;
}

int run_export(const std::string& data_dir, const std::string& project_id, const std::string& attribute) {
  db::GatewayConfig config;
  config.data_dir = data_dir;
  db::Gateway gateway(config);
  const auto result = gateway.export_manifest(project_id, attribute, nlohmann::json::object());
  if (result["status"] == "empty") {
    fmt::print("no qualifying data: {}\n", result["reason"].get<std::string>());
    return 0;
  }
  fmt::print("{} entries, sha256 {}\n{}\n", result["manifest"]["entries"].size(),
             result["manifest_sha256"].get<std::string>(), result["path"].get<std::string>());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DesignBridge co-design preference engine"};
  app.require_subcommand(1);

  std::string data_dir, host = "127.0.0.1", mode = "mock", token;
  int port = 8080, max_rounds = db::kDefaultMaxRounds;
  std::uint64_t seed = 7;
  auto* serve = app.add_subcommand("serve", "Run the HTTP API");
  serve->add_option("--data-dir", data_dir, "Event logs, blobs and derived files (in memory when omitted)");
  serve->add_option("--host", host, "Listen address");
  serve->add_option("--port", port, "Listen port (0 picks a free one)");
  serve->add_option("--mode", mode, "Backend mode: mock or external")->check(CLI::IsMember({"mock", "external"}));
  serve->add_option("--seed", seed, "Default project seed");
  serve->add_option("--max-rounds", max_rounds, "Rounds per session")->check(CLI::PositiveNumber);
  serve->add_option("--token", token, "Require this bearer token");

  db::sim::SimulationConfig sim;
  std::string strategy = "both", out_dir = "sim-out";
  auto* simulate = app.add_subcommand("simulate", "Run synthetic user populations through the API");
  simulate->add_option("--users", sim.users, "Users per project");
  simulate->add_option("--catalog", sim.catalog_size, "Library size");
  simulate->add_option("--rounds", sim.rounds, "Rounds per session");
  simulate->add_option("--seeds", sim.seeds, "Number of seeds");
  simulate->add_option("--seed-base", sim.seed_base, "First seed");
  simulate->add_option("--noise", sim.noise, "Label flip probability");
  simulate->add_option("--informed", sim.informed_items, "Informed items generated per run");
  simulate->add_option("--strategy", strategy, "entropy, random or both")
      ->check(CLI::IsMember({"entropy", "random", "both"}));
  simulate->add_option("--out", out_dir, "Output directory for CSV files");

  std::string log_path;
  bool as_json = false;
  auto* replay = app.add_subcommand("replay", "Rebuild state from an event log and print its hash");
  replay->add_option("log", log_path, "events.jsonl")->required();
  replay->add_flag("--json", as_json, "Print a JSON summary");

  std::string project_id, report_out = "report";
  auto* report = app.add_subcommand("report", "Write consensus and attribution tables for a project");
  report->add_option("--data-dir", data_dir)->required();
  report->add_option("--project", project_id)->required();
  report->add_option("--out", report_out, "Output directory");

  std::string attribute;
  auto* exporter = app.add_subcommand("export-manifest", "Export the fine-tuning manifest of one attribute");
  exporter->add_option("--data-dir", data_dir)->required();
  exporter->add_option("--project", project_id)->required();
  exporter->add_option("--attribute", attribute, "\"Dimension:Attribute\" or \"d.a\"")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*serve) return run_serve(data_dir, host, port, mode, seed, max_rounds, token);
    if (*simulate) return run_simulate(sim, strategy, out_dir);
    if (*replay) return run_replay(log_path, as_json);
    if (*report) return run_report(data_dir, project_id, report_out);
    if (*exporter) return run_export(data_dir, project_id, attribute);
  } catch (const db::Error& e) {
    fmt::print(stderr, "error {}: {}\n", db::code_name(e.code()), e.what());
    return 2;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 2;
  }
  return 0;
}
