#include <gtest/gtest.h>

#include <cstdlib>

#include <fmt/format.h>

#include "reponav/config.hpp"
#include "reponav/engine.hpp"
#include "reponav/error.hpp"
#include "reponav/persistence.hpp"
#include "reponav/service.hpp"
#include "support.hpp"

#include <httplib.h>

using namespace reponav;
using namespace reponav::testing;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct CliResult {
    int code;
    std::string out;
    std::string err;
};

CliResult cli(const std::string& args) {
    TempDir io;
    auto out = io.path() / "out", err = io.path() / "err";
    std::string cmd = fmt::format("\"{}\" {} >\"{}\" 2>\"{}\"", REPONAV_CLI, args, out.string(), err.string());
    int status = std::system(cmd.c_str());
    return {WEXITSTATUS(status), read_text(out), read_text(err)};
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);)
        if (!line.empty()) out.push_back(line);
    return out;
}

void expect_error(ErrorCode code, const std::function<void()>& fn) {
    try {
        fn();
        ADD_FAILURE() << "expected " << to_string(code);
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), code) << e.what();
    }
}

std::string locate_script(int n) { return (fixture_dir() / "locate" / fmt::format("q{:02}.json", n)).string(); }

void copy_sample(const fs::path& to) { fs::copy(sample_repo(), to, fs::copy_options::recursive); }

}  // namespace

TEST(Config, RejectsUnknownKeys) {
    expect_error(ErrorCode::ConfigError, [] { AppConfig::from_json({{"budgte", json::object()}}); });
    expect_error(ErrorCode::ConfigError, [] { AppConfig::from_json({{"budget", {{"tua", 80}}}}); });
    expect_error(ErrorCode::ConfigError, [] { AppConfig::from_json({{"service", {{"prot", 1}}}}); });
    expect_error(ErrorCode::ConfigError, [] { AppConfig::from_json({{"budget", {{"w1", 0.9}}}}); });
    expect_error(ErrorCode::ConfigError, [] { AppConfig::from_json({{"embedding", {{"provider", "magic"}}}}); });
}

TEST(Config, RoundTripAndDefaults) {
    auto cfg = AppConfig::from_json({{"budget", {{"tau", 80}, {"T", 4}}}, {"top_k", 3}, {"scan", {{"exclude", {"tests/**"}}}}});
    EXPECT_EQ(cfg.budget.tau, 80);
    EXPECT_EQ(cfg.budget.horizon, 4);
    EXPECT_EQ(cfg.budget.patience, 2);
    EXPECT_EQ(cfg.top_k, 3u);
    auto again = AppConfig::from_json(cfg.to_json());
    EXPECT_EQ(again.to_json(), cfg.to_json());
}

TEST(Persistence, FiveFilesAndIdenticalDigestsOnReindex) {
    TempDir a, b;
    AppConfig cfg;
    auto m1 = build_index(sample_repo(), a.path(), cfg);
    auto m2 = build_index(sample_repo(), b.path(), cfg);
    std::set<std::string> names;
    for (const auto& e : fs::directory_iterator(a.path())) names.insert(e.path().filename().string());
    EXPECT_EQ(names, (std::set<std::string>{"manifest.json", "units.json", "graph.bin", "sparse.bin", "dense.bin"}));
    ASSERT_EQ(m1.sections.size(), 4u);
    for (const auto& [name, info] : m1.sections) EXPECT_EQ(info.sha256, m2.sections.at(name).sha256) << name;
    EXPECT_EQ(m1.snapshot_hash, m2.snapshot_hash);

    auto m3 = build_index(sample_repo(), a.path(), cfg);
    for (const auto& [name, info] : m1.sections) EXPECT_EQ(info.sha256, m3.sections.at(name).sha256) << name;
}

TEST(Persistence, LoadReproducesSectionsBitIdentically) {
    for (auto provider : {"none", "mock"}) {
        TempDir dir;
        auto cfg = AppConfig::from_json({{"embedding", {{"provider", provider}, {"mock_dim", 16}}}});
        auto manifest = build_index(sample_repo(), dir.path(), cfg);
        PythonGrammar grammar;
        auto loaded = load_index(dir.path(), grammar);
        EXPECT_EQ(loaded.manifest.snapshot_hash, manifest.snapshot_hash);
        EXPECT_EQ(read_text(dir.path() / "units.json"), serialize_units(loaded.model));
        EXPECT_EQ(read_text(dir.path() / "graph.bin"), serialize_graph(loaded.graph));
        EXPECT_EQ(read_text(dir.path() / "sparse.bin"), serialize_sparse(loaded.index));
        EXPECT_EQ(read_text(dir.path() / "dense.bin"), serialize_dense(loaded.index));
        EXPECT_EQ(loaded.model.units().size(), sample().model.units().size());
        EXPECT_EQ(manifest.provider_id.has_value(), std::string(provider) == "mock");
    }
}

TEST(Persistence, CorruptSectionIsRejected) {
    TempDir dir;
    build_index(sample_repo(), dir.path(), AppConfig{});
    auto bytes = read_text(dir.path() / "graph.bin");
    bytes[bytes.size() / 2] ^= 0x5a;
    write_text(dir.path() / "graph.bin", bytes);
    PythonGrammar grammar;
    expect_error(ErrorCode::CorruptIndex, [&] { load_index(dir.path(), grammar); });
}

TEST(Persistence, StaleIndexNeedsOptIn) {
    TempDir repo, idx;
    copy_sample(repo.path() / "r");
    build_index(repo.path() / "r", idx.path(), AppConfig{});
    auto file = repo.path() / "r" / "utils" / "text.py";
    write_text(file, read_text(file) + "\n\ndef added():\n    return 1\n");
    PythonGrammar grammar;
    expect_error(ErrorCode::StaleIndex, [&] { load_index(idx.path(), grammar); });
    EXPECT_NO_THROW(load_index(idx.path(), grammar, LoadOptions{true}));
    expect_error(ErrorCode::IndexMissing, [&] { load_index(repo.path() / "nothing", grammar); });
}

TEST(Cli, IndexThenLocateHonoursTopK) {
    TempDir idx;
    auto r = cli(fmt::format("--index {} index {}", q(idx.path()), q(sample_repo())));
    ASSERT_EQ(r.code, 0) << r.err;
    auto located = cli(fmt::format("--index {} locate {} --scripted {} --top-k 5", q(idx.path()),
                                   q("Where do environment variables override values in the application config?"),
                                   q(locate_script(3))));
    ASSERT_EQ(located.code, 0) << located.err;
    auto lines = lines_of(located.out);
    ASSERT_FALSE(lines.empty());
    EXPECT_LE(lines.size(), 5u);
    EXPECT_NE(lines[0].find("app/config.py"), std::string::npos);

    auto wide = cli(fmt::format("--index {} query {} --top-k 5", q(idx.path()), q("load config")));
    EXPECT_EQ(wide.code, 0);
    EXPECT_LE(lines_of(wide.out).size(), 5u);
}

TEST(Cli, ExitCodes) {
    TempDir idx, empty;
    EXPECT_EQ(cli(fmt::format("--index {} index {}", q(idx.path()), q(empty.path() / "missing"))).code, 2);
    auto missing = cli(fmt::format("--index {} locate anything", q(idx.path() / "none")));
    EXPECT_EQ(missing.code, 3);
    EXPECT_FALSE(missing.err.empty());

    TempDir repo;
    copy_sample(repo.path() / "r");
    ASSERT_EQ(cli(fmt::format("--index {} index {}", q(idx.path()), q(repo.path() / "r"))).code, 0);
    write_text(repo.path() / "r" / "extra.py", "def extra():\n    return 2\n");
    EXPECT_EQ(cli(fmt::format("--index {} stats", q(idx.path()))).code, 4);
    EXPECT_EQ(cli(fmt::format("--index {} stats --allow-stale", q(idx.path()))).code, 0);
}

TEST(Cli, EmptyIndexGivesEmptyResult) {
    TempDir repo, idx;
    ASSERT_EQ(cli(fmt::format("--index {} index {}", q(idx.path()), q(repo.path()))).code, 0);
    auto r = cli(fmt::format("--index {} locate {}", q(idx.path()), q("where is anything")));
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(lines_of(r.out).empty());
    auto j = cli(fmt::format("--index {} locate {} --json", q(idx.path()), q("where is anything")));
    EXPECT_EQ(j.code, 0);
    auto payload = json::parse(j.out);
    EXPECT_TRUE(payload["files"].empty());
    EXPECT_EQ(payload["terminal_reason"], "Exhaustion-degenerate");
}

TEST(Cli, TraceFileIsWritten) {
    TempDir idx;
    ASSERT_EQ(cli(fmt::format("--index {} index {}", q(idx.path()), q(sample_repo()))).code, 0);
    auto trace = idx.path() / "trace.json";
    auto r = cli(fmt::format("--index {} locate {} --scripted {} --trace {}", q(idx.path()),
                             q("How are HMAC signatures attached to outgoing requests?"), q(locate_script(2)), q(trace)));
    ASSERT_EQ(r.code, 0) << r.err;
    auto t = json::parse(read_text(trace));
    EXPECT_EQ(t["version"], 1);
    EXPECT_EQ(t["terminal_reason"], "Sufficiency");
    EXPECT_FALSE(t["rounds"].empty());
}

TEST(Service, StatsBeforeIndexIsConflict) {
    TempDir idx;
    Service svc(AppConfig{}, idx.path());
    EXPECT_FALSE(svc.try_load());
    EXPECT_EQ(svc.handle("GET", "/stats", "").status, 409);
    EXPECT_EQ(svc.handle("POST", "/locate", R"({"query":"x"})").status, 409);
    EXPECT_EQ(svc.handle("GET", "/nowhere", "").status, 404);
}

TEST(Service, IndexThenContextRespectsBudget) {
    TempDir idx;
    Service svc(AppConfig{}, idx.path());
    auto indexed = svc.handle("POST", "/index", json{{"path", sample_repo().string()}}.dump());
    ASSERT_EQ(indexed.status, 200) << indexed.body.dump();
    EXPECT_FALSE(indexed.body["snapshot_hash"].get<std::string>().empty());

    auto ctx = svc.handle("POST", "/context", R"({"query":"how does the loader pick a parser"})");
    ASSERT_EQ(ctx.status, 200) << ctx.body.dump();
    const auto& pack = ctx.body["pack"];
    EXPECT_LE(pack["total_lines"].get<int>(), pack["budget"].get<int>());
    EXPECT_GT(pack["units"].size(), 0u);
    EXPECT_EQ(svc.handle("POST", "/context", R"({"q":1})").status, 400);
    EXPECT_EQ(svc.handle("POST", "/context", "not json").status, 400);

    auto stats = svc.handle("GET", "/stats", "");
    EXPECT_EQ(stats.status, 200);
    EXPECT_EQ(stats.body["snapshot_hash"], indexed.body["snapshot_hash"]);
}

TEST(Service, AnswerWithoutReasonerIsBadGateway) {
    TempDir idx;
    build_index(sample_repo(), idx.path(), AppConfig{});
    Service svc(AppConfig{}, idx.path());
    ASSERT_TRUE(svc.try_load());
    if (std::getenv("REASONER_URL")) GTEST_SKIP() << "live reasoner configured";
    EXPECT_EQ(svc.handle("POST", "/answer", R"({"query":"what does slugify do"})").status, 502);
}

TEST(Service, LocateMatchesCliPayload) {
    TempDir idx, tmp;
    build_index(sample_repo(), idx.path(), AppConfig{});
    auto cfg_path = tmp.path() / "config.json";
    write_text(cfg_path, json{{"reasoner", {{"scripted", locate_script(1)}}}}.dump());
    const std::string query = "Where is the delay between retry attempts computed with exponential growth?";

    auto r = cli(fmt::format("--config {} --index {} locate {} --json --top-k 5", q(cfg_path), q(idx.path()), q(query)));
    ASSERT_EQ(r.code, 0) << r.err;
    auto from_cli = json::parse(r.out);

    Service svc(AppConfig::from_file(cfg_path.string()), idx.path());
    ASSERT_TRUE(svc.try_load());
    int port = svc.bind("127.0.0.1", 0);
    std::thread th([&] { svc.listen(); });
    httplib::Client client("127.0.0.1", port);
    auto res = client.Post("/locate", json{{"query", query}, {"top_k", 5}}.dump(), "application/json");
    svc.stop();
    th.join();
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 200);
    EXPECT_EQ(res->get_header_value(kIndexFormatHeader), std::to_string(kIndexFormatVersion));
    auto from_http = json::parse(res->body);
    EXPECT_EQ(from_http, from_cli);
    EXPECT_EQ(from_http["files"][0]["path"], "net/backoff.py");
}

TEST(Service, ConcurrentLocateRequestsAgree) {
    TempDir idx;
    build_index(sample_repo(), idx.path(), AppConfig{});
    AppConfig cfg;
    cfg.reasoner.scripted = locate_script(7);
    Service svc(cfg, idx.path());
    ASSERT_TRUE(svc.try_load());
    const std::string body = json{{"query", "Where are components registered and looked up by name?"}}.dump();
    auto expected = svc.handle("POST", "/locate", body).body;
    std::vector<std::thread> threads;
    std::vector<json> got(4);
    for (int i = 0; i < 4; ++i) threads.emplace_back([&, i] { got[i] = svc.handle("POST", "/locate", body).body; });
    for (auto& th : threads) th.join();
    for (const auto& g : got) EXPECT_EQ(g, expected);
}
