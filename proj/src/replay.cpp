#include "gazeguide/simulation.hpp"

#include <deque>
#include <fstream>

namespace gazeguide {

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line + '\n');
  return lines;
}

ReplayReport replay(const std::vector<std::string>& lines, const EngineConfig& cfg, const std::vector<Poi>& world) {
  Engine engine(cfg);
  for (const Poi& p : world) engine.add_poi(p);

  ReplayReport report;
  std::deque<std::string> pending;
  std::size_t last_input_line = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t lineno = i + 1;
    std::string line = lines[i];
    if (line.empty() || line.back() != '\n') line.push_back('\n');
    if (line.find_first_not_of("\r\n") == std::string::npos) continue;
    ++report.lines;

    WireMessage m;
    try {
      m = decode(line);
    } catch (const ProtocolError& e) {
      throw DivergenceError(lineno, "line " + std::to_string(lineno) + " is not a valid message: " + e.what());
    }

    if (is_engine_input(m)) {
      if (!pending.empty())
        throw DivergenceError(lineno, "line " + std::to_string(lineno) + ": expected emission " + pending.front());
      ++report.inputs;
      last_input_line = lineno;
      for (const WireMessage& e : engine.handle(m)) pending.push_back(encode(e));
    } else if (is_engine_emission(m) && m.seq > 0) {
      if (pending.empty())
        throw DivergenceError(lineno, "line " + std::to_string(lineno) + ": logged emission was not reproduced");
      if (pending.front() != line)
        throw DivergenceError(lineno, "line " + std::to_string(lineno) + ": emission differs, replay produced " +
                                          pending.front());
      pending.pop_front();
      ++report.emissions;
    }
    // HELLO, WELCOME and session-layer errors carry no engine state.
  }
  if (!pending.empty()) {
    const std::size_t at = last_input_line ? last_input_line : lines.size();
    throw DivergenceError(at, "log ends before emission " + pending.front());
  }
  return report;
}

}  // namespace gazeguide
