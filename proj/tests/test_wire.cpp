#include <chrono>
#include <string>
#include <thread>
#include <vector>

#include <catch2/catch_amalgamated.hpp>
#include <json.hpp>

#include "camd/controller.hpp"
#include "camd/synthetic.hpp"
#include "camd/wire.hpp"

using namespace camd;

namespace {

synthetic_instance wire_instance(double s, std::uint64_t seed) {
  auto inst = make_instance(difficulty_distribution::point_mass(0.5), 8, 4,
                            seed);
  inst.true_s = s;
  return inst;
}

struct server_fixture {
  synthetic_backend backend;
  wire_server server{backend};
  std::thread runner;

  server_fixture() {
    backend.register_instance("q1", wire_instance(0.9, 101));
    server.bind_listen(0);
    runner = std::thread([this] { server.run(); });
  }

  ~server_fixture() {
    server.stop();
    runner.join();
  }
};

}  // namespace

TEST_CASE("wire transport replays the in-process candidate stream",
          "[wire]") {
  server_fixture fx;

  synthetic_backend local;
  local.register_instance("q1", wire_instance(0.9, 101));
  const auto want = local.generate("q1", 8, 555);

  {
    wire_backend client("127.0.0.1", fx.server.port());
    const auto first = client.generate("q1", 4, 555);
    const auto second = client.generate("q1", 4, 555);
    REQUIRE(first.size() == 4);
    REQUIRE(second.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
      REQUIRE(candidate_to_json(first[i]).dump() ==
              candidate_to_json(want[i]).dump());
      REQUIRE(candidate_to_json(second[i]).dump() ==
              candidate_to_json(want[i + 4]).dump());
    }
    REQUIRE(client.costs().calls == 2);
    REQUIRE(client.costs().candidates == 8);

    const auto ctx = client.context("q1");
    REQUIRE(context_to_json(ctx).dump() ==
            context_to_json(local.context("q1")).dump());

    REQUIRE_THROWS_AS(client.generate("nope", 2, 1), wire_error);
    REQUIRE_THROWS_AS(client.generate("q1", 0, 1), wire_error);
    REQUIRE_THROWS_AS(client.context("nope"), wire_error);
  }
}

TEST_CASE("malformed request lines come back as error objects", "[wire]") {
  server_fixture fx;

  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  REQUIRE(fd >= 0);
  detail::socket_guard guard(fd);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(fx.server.port());
  ::inet_pton(AF_INET, "127.0.0.1", &addr.sin_addr);
  REQUIRE(::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) ==
          0);

  detail::send_line(fd, "this is not json");
  detail::line_reader reader(fd);
  std::string line;
  REQUIRE(reader.next(line));
  const auto reply = nlohmann::json::parse(line);
  REQUIRE(reply.contains("error"));

  detail::send_line(fd, R"({"batch": 2, "seed": 1})");
  REQUIRE(reader.next(line));
  REQUIRE(nlohmann::json::parse(line).contains("error"));

  detail::send_line(fd, R"({"instance_id": "q1", "want": "nonsense"})");
  REQUIRE(reader.next(line));
  REQUIRE(nlohmann::json::parse(line).contains("error"));
}

TEST_CASE("controller runs unchanged against the wire backend", "[wire]") {
  server_fixture fx;
  wire_backend client("127.0.0.1", fx.server.port());

  const auto ctx = client.context("q1");
  controller_config cfg;
  cfg.batch_size = 2;
  cfg.max_samples = 16;
  adaptive_controller ctl(stopping_policy::camd(0.05), cfg, &ctx);

  step_decision d;
  long long batch = cfg.batch_size;
  std::uint64_t call = 0;
  do {
    d = ctl.step(client.generate("q1", batch, 555));
    batch = d.next_batch > 0 ? d.next_batch : batch;
    ++call;
  } while (!d.stop && call < 64);

  REQUIRE(d.stop);
  REQUIRE_FALSE(d.final_answer.empty());
  REQUIRE(ctl.state().samples_used == client.costs().candidates);
  REQUIRE(ctl.state().samples_used <= 16);
}
