#include <iostream>

#include <CLI11.hpp>

#include "cgr/error.hpp"
#include "cgr/mock_backend.hpp"
#include "cgr/remote_backend.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Serve a mock model over the next-token HTTP protocol"};
  std::string host = "127.0.0.1";
  int port = 8088;
  std::uint64_t seed = 0;
  std::int64_t crossing = -1;
  std::string answer = "42";
  cgr::MockProfile profile;
  app.add_option("--host", host);
  app.add_option("--port", port);
  app.add_option("--seed", seed);
  app.add_option("--crossing", crossing, "step where certainty jumps (negative: never)");
  app.add_option("--pre", profile.pre_certainty, "certainty before the crossing");
  app.add_option("--post", profile.post_certainty, "certainty after the crossing");
  app.add_option("--stop-attempts", profile.stop_attempt_steps, "steps that emit end of thinking");
  app.add_option("--noise", profile.noise_amplitude);
  app.add_option("--answer", answer, "answer digits");
  CLI11_PARSE(app, argc, argv);

  try {
    if (crossing >= 0) profile.crossing_step = crossing;
    profile.answer_digits.clear();
    for (char c : answer) {
      if (c < '0' || c > '9') throw cgr::InvalidProfile("--answer must be decimal digits");
      profile.answer_digits.push_back(c - '0');
    }
    cgr::StubServer server(cgr::build_mock(seed, profile));
    std::cout << "listening on http://" << host << ':' << port << std::endl;
    server.listen(host, port);
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return 1;
  }
  return 0;
}
