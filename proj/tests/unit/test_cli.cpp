// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <httplib.h>

#include <atomic>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <json.hpp>
#include <sstream>
#include <thread>

#include <sys/wait.h>
#include <unistd.h>

#include "twin/cli.hpp"
#include "twin/forecast/model_io.hpp"
#include "twin/record_io.hpp"
#include "twin/text.hpp"
#include "unit/support.hpp"

using namespace twin;
using nlohmann::json;

namespace {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result twin_run(std::vector<std::string> args, const std::atomic<bool>* stop = nullptr) {
  args.insert(args.begin(), "twin");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  Result r;
  r.code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err, stop);
  r.out = out.str();
  r.err = err.str();
  return r;
}

// Waits for a --port-file to appear and returns the port in it.
int wait_port(const std::string& path) {
  for (int i = 0; i < 500; ++i) {
    if (std::filesystem::exists(path)) {
      auto text = read_file(path);
      if (!text.empty() && text.back() == '\n') return static_cast<int>(parse_int(text));
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  return -1;
}

}  // namespace

TEST_CASE("cli usage errors") {
  CHECK(twin_run({}).code == cli::kUsage);
  CHECK(twin_run({"frobnicate"}).code == cli::kUsage);
  CHECK(twin_run({"simulate"}).code == cli::kUsage);  // --out is required
  CHECK(twin_run({"--help"}).code == cli::kOk);
}

TEST_CASE("cli simulate is deterministic and seedable") {
  testing::TempDir dir;
  auto a = twin_run({"simulate", "--duration", "120s", "--out", dir.file("a.txt")});
  auto b = twin_run({"simulate", "--duration", "2m", "--out", dir.file("b.txt")});
  auto c = twin_run({"--seed", "9", "simulate", "--duration", "120s", "--out", dir.file("c.txt")});
  REQUIRE(a.code == cli::kOk);
  REQUIRE(b.code == cli::kOk);
  REQUIRE(c.code == cli::kOk);
  CHECK(read_file(dir.file("a.txt")) == read_file(dir.file("b.txt")));
  CHECK(read_file(dir.file("a.txt")) != read_file(dir.file("c.txt")));
  CHECK(a.out.rfind("records ", 0) == 0);
  CHECK(a.out.find("\nWTOW 720\n") != std::string::npos);
  auto records = load_records(dir.file("a.txt"));
  CHECK(a.out.rfind("records " + std::to_string(records.size()) + "\n", 0) == 0);

  // Seed given after the subcommand works too.
  auto d = twin_run({"simulate", "--seed", "9", "--duration", "120s", "--out", dir.file("d.txt")});
  CHECK(d.code == cli::kOk);
  CHECK(read_file(dir.file("c.txt")) == read_file(dir.file("d.txt")));

  auto faulty = twin_run({"simulate", "--scenario", std::string(TWIN_SOURCE_DIR) + "/data/scenarios/faulty.conf",
                          "--duration", "60s", "--out", dir.file("f.txt")});
  CHECK(faulty.code == cli::kOk);
}

TEST_CASE("cli simulate rejects a zero duration") {
  testing::TempDir dir;
  auto r = twin_run({"simulate", "--duration", "0s", "--out", dir.file("z.txt")});
  CHECK(r.code == cli::kDataError);
  CHECK(r.err.rfind("twin: error: ConfigError:", 0) == 0);
  CHECK_FALSE(std::filesystem::exists(dir.file("z.txt")));
  CHECK(twin_run({"simulate", "--duration", "soon", "--out", dir.file("z.txt")}).code == cli::kDataError);
}

TEST_CASE("cli missing input is a runtime error") {
  testing::TempDir dir;
  auto r = twin_run({"train", "--data", dir.file("absent.txt"), "--out", dir.file("m.json")});
  CHECK(r.code == cli::kRuntimeError);
  CHECK(r.err.find("IoError") != std::string::npos);
}

TEST_CASE("cli ingest merges into a store file") {
  testing::TempDir dir;
  REQUIRE(twin_run({"simulate", "--duration", "30s", "--out", dir.file("r.txt")}).code == 0);
  auto first = twin_run({"ingest", "--data", dir.file("r.txt"), "--out", dir.file("store.txt")});
  REQUIRE(first.code == 0);
  auto n = load_records(dir.file("r.txt")).size();
  CHECK(first.out.rfind("accepted " + std::to_string(n) + "\n", 0) == 0);
  auto again = twin_run({"ingest", "--data", dir.file("r.txt"), "--out", dir.file("store.txt")});
  CHECK(again.out.rfind("accepted 0\n", 0) == 0);
  CHECK(again.out.find("deduplicated " + std::to_string(n)) != std::string::npos);
  CHECK(twin_run({"ingest", "--data", dir.file("r.txt")}).code == cli::kDataError);
}

TEST_CASE("cli train, benchmark and their failure modes") {
  testing::TempDir dir;
  REQUIRE(twin_run({"simulate", "--duration", "1200s", "--out", dir.file("train.txt")}).code == 0);
  REQUIRE(twin_run({"simulate", "--start", "2022-02-01T00:20:00Z", "--seed", "5", "--duration", "600s", "--out",
                    dir.file("test.txt")})
              .code == 0);
  std::string params = "WTUR.ActivePower,WMET.WindSpeed,WTOW.Pitch,WTOW.Heave";

  auto tr = twin_run({"train", "--data", dir.file("train.txt"), "--kind", "dnn", "--hidden", "32,32", "--params",
                      params, "--epochs", "3", "--out", dir.file("dnn.json")});
  REQUIRE(tr.code == cli::kOk);
  CHECK(tr.out.rfind("epoch 0 train_loss ", 0) == 0);
  auto model = forecast::load_model(dir.file("dnn.json"));
  CHECK(model.task.parameters.size() == 4);
  CHECK(model.norm.parameters == model.task.parameters);

  auto pre = twin_run({"train", "--data", dir.file("train.txt"), "--kind", "dnn", "--hidden", "32,32", "--params",
                       params, "--epochs", "2", "--pretrain", "--pretrain-samples", "20000", "--out",
                       dir.file("pre.json")});
  REQUIRE(pre.code == cli::kOk);
  CHECK(pre.out.rfind("pretrain samples ", 0) == 0);
  CHECK(forecast::load_model(dir.file("pre.json")).provenance == forecast::Provenance::persistence_pretrained);

  auto bm = twin_run({"benchmark", "--data", dir.file("test.txt"), "--models", dir.file("dnn.json"),
                      dir.file("pre.json"), "--format", "csv", "--csv", dir.file("rows.csv")});
  REQUIRE(bm.code == cli::kOk);
  CHECK(bm.out.rfind("model,timescale,nrmse,relative\npersistence,seconds,", 0) == 0);
  CHECK(bm.out.find("\ndnn,seconds,") != std::string::npos);
  CHECK(bm.out.find("\ndnn-pretrained,seconds,") != std::string::npos);
  CHECK(read_file(dir.file("rows.csv")) == bm.out);

  SUBCASE("hour scale on minutes of data is insufficient") {
    auto r = twin_run({"train", "--data", dir.file("train.txt"), "--timescale", "hours", "--out", dir.file("h.json")});
    CHECK(r.code == cli::kDataError);
    CHECK(r.err.find("InsufficientData") != std::string::npos);
    CHECK_FALSE(std::filesystem::exists(dir.file("h.json")));
  }
  SUBCASE("models with different tasks cannot share a table") {
    REQUIRE(twin_run({"train", "--data", dir.file("train.txt"), "--kind", "dnn", "--hidden", "8", "--params", params,
                      "--m", "20", "--epochs", "1", "--out", dir.file("m20.json")})
                .code == 0);
    auto r = twin_run({"benchmark", "--data", dir.file("test.txt"), "--models", dir.file("dnn.json"),
                       dir.file("m20.json")});
    CHECK(r.code == cli::kDataError);
    CHECK(r.err.find("TaskMismatch") != std::string::npos);
    CHECK(r.err.find("m=20") != std::string::npos);
  }
  SUBCASE("persistence only") {
    auto r = twin_run({"benchmark", "--data", dir.file("test.txt"), "--params", params});
    REQUIRE(r.code == cli::kOk);
    CHECK(r.out.find("persistence") != std::string::npos);
    CHECK(r.out.find("dnn") == std::string::npos);
  }
  SUBCASE("unknown parameter") {
    auto r = twin_run({"train", "--data", dir.file("train.txt"), "--params", "WTOW.Nope", "--out", dir.file("x.json")});
    CHECK(r.code == cli::kDataError);
    CHECK(r.err.find("UnknownParameter") != std::string::npos);
  }
}

TEST_CASE("cli serve flushes its store and restores it on restart") {
  testing::TempDir dir;
  REQUIRE(twin_run({"simulate", "--duration", "20s", "--out", dir.file("r.txt")}).code == 0);
  std::atomic<bool> stop{false};
  Result served;
  std::thread th([&] {
    served = twin_run({"serve", "--bind", "127.0.0.1:0", "--token", "t", "--store", dir.file("store.txt"),
                       "--port-file", dir.file("port")},
                      &stop);
  });
  int port = wait_port(dir.file("port"));
  REQUIRE(port > 0);
  auto push = twin_run({"ingest", "--data", dir.file("r.txt"), "--url", "http://127.0.0.1:" + std::to_string(port),
                        "--token", "t", "--batch", "100"});
  CHECK(push.code == cli::kOk);
  auto denied = twin_run({"ingest", "--data", dir.file("r.txt"), "--url",
                          "http://127.0.0.1:" + std::to_string(port), "--token", "wrong"});
  CHECK(denied.code == cli::kRuntimeError);
  CHECK(denied.err.find("Unauthorized") != std::string::npos);

  // Binding the same port again fails with a runtime error.
  auto clash = twin_run({"serve", "--bind", "127.0.0.1:" + std::to_string(port)});
  CHECK(clash.code == cli::kRuntimeError);
  CHECK(clash.err.find("BindError") != std::string::npos);

  stop = true;
  th.join();
  CHECK(served.code == cli::kOk);
  auto stored = load_records(dir.file("store.txt"));
  CHECK(stored.size() == load_records(dir.file("r.txt")).size());

  // Restart on the same store: the history is back.
  std::filesystem::remove(dir.file("port"));
  stop = false;
  std::thread again([&] {
    served = twin_run({"serve", "--bind", "127.0.0.1:0", "--store", dir.file("store.txt"), "--port-file",
                       dir.file("port")},
                      &stop);
  });
  port = wait_port(dir.file("port"));
  REQUIRE(port > 0);
  httplib::Client c("127.0.0.1", port);
  auto res = c.Get("/api/v1/historic?from=2022-02-01T00:00:00Z&to=2022-02-01T00:00:19Z&params=WMET.WindSpeed");
  REQUIRE(res);
  CHECK(res->status == 200);
  auto j = json::parse(res->body);
  CHECK(j["values"][0][0].is_number());
  CHECK(j["values"][19][0].is_number());
  stop = true;
  again.join();
}

TEST_CASE("the twin binary stops cleanly on SIGINT") {
  testing::TempDir dir;
  std::string port_file = dir.file("port");
  pid_t pid = fork();
  REQUIRE(pid >= 0);
  if (pid == 0) {
    std::freopen("/dev/null", "w", stderr);
    execl(TWIN_CLI_PATH, "twin", "serve", "--bind", "127.0.0.1:0", "--port-file", port_file.c_str(),
          static_cast<char*>(nullptr));
    _exit(127);
  }
  int port = wait_port(port_file);
  CHECK(port > 0);
  kill(pid, SIGINT);
  int status = 0;
  waitpid(pid, &status, 0);
  REQUIRE(WIFEXITED(status));
  CHECK(WEXITSTATUS(status) == 0);
}
