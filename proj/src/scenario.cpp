#include "delaysync/scenario.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "delaysync/error.hpp"
#include "delaysync/textio.hpp"

namespace delaysync {

std::string_view to_string(ScenarioMode mode) {
  switch (mode) {
    case ScenarioMode::StaticFullState: return "static-full-state";
    case ScenarioMode::DynamicPartialState: return "dynamic-partial-state";
    case ScenarioMode::Heterogeneous: return "heterogeneous";
  }
  return "unknown";
}

bool Scenario::operator==(const Scenario& o) const {
  auto same_matrix = [](const Matrix& a, const Matrix& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
  };
  auto same_opt_matrix = [&](const std::optional<Matrix>& a, const std::optional<Matrix>& b) {
    return a.has_value() == b.has_value() && (!a || same_matrix(*a, *b));
  };
  auto same_vectors = [&](const std::vector<Vector>& a, const std::vector<Vector>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (!same_matrix(a[i], b[i])) return false;
    }
    return true;
  };
  if (agents.size() != o.agents.size()) return false;
  for (std::size_t i = 0; i < agents.size(); ++i) {
    if (!same_matrix(agents[i].A, o.agents[i].A) || !same_matrix(agents[i].B, o.agents[i].B) ||
        !same_matrix(agents[i].C, o.agents[i].C)) {
      return false;
    }
  }
  return mode == o.mode && same_matrix(weights, o.weights) && beta == o.beta &&
         alpha == o.alpha && delays == o.delays && same_opt_matrix(Q_design, o.Q_design) &&
         rho == o.rho && delta_init == o.delta_init && epsilon_init == o.epsilon_init &&
         nbar == o.nbar && same_opt_matrix(K, o.K) && step == o.step && horizon == o.horizon &&
         stride == o.stride && history == o.history && frames == o.frames && pairs == o.pairs &&
         same_vectors(initial_states, o.initial_states) &&
         same_vectors(controller_states, o.controller_states) &&
         same_vectors(history_slopes, o.history_slopes) &&
         tolerances.terminal_error == o.tolerances.terminal_error &&
         tolerances.certificate_margin == o.tolerances.certificate_margin;
}

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

/// Location-aware failure helper.
struct Where {
  int line;
  std::string field;

  [[noreturn]] void fail(const std::string& message) const {
    std::string where = "line " + std::to_string(line);
    if (!field.empty()) where += ", field '" + field + "'";
    throw Error(ErrorKind::ParseError, where + ": " + message);
  }
};

double parse_number(std::string_view text, const Where& at) {
  const std::string s = trim(text);
  double value = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (s.empty() || ec != std::errc() || ptr != last) at.fail("expected a number, got '" + s + "'");
  if (!std::isfinite(value)) at.fail("number must be finite");
  return value;
}

int parse_integer(std::string_view text, const Where& at) {
  const std::string s = trim(text);
  int value = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    at.fail("expected an integer, got '" + s + "'");
  }
  return value;
}

/// Splits "[a, b, c]" into its top-level items.
std::vector<std::string> bracket_items(const std::string& text, const Where& at) {
  const std::string s = trim(text);
  if (s.size() < 2 || s.front() != '[' || s.back() != ']') at.fail("expected a bracketed list");
  std::vector<std::string> items;
  int depth = 0;
  std::string current;
  for (std::size_t i = 1; i + 1 < s.size(); ++i) {
    const char c = s[i];
    if (c == '[') ++depth;
    if (c == ']' && --depth < 0) at.fail("unbalanced brackets");
    if (c == ',' && depth == 0) {
      items.push_back(trim(current));
      current.clear();
      continue;
    }
    current += c;
  }
  if (depth != 0) at.fail("unbalanced brackets");
  const std::string last = trim(current);
  if (!last.empty() || !items.empty()) items.push_back(last);
  for (const auto& item : items) {
    if (item.empty()) at.fail("empty list element");
  }
  return items;
}

Vector parse_vector(const std::string& text, const Where& at) {
  const auto items = bracket_items(text, at);
  Vector v(static_cast<Eigen::Index>(items.size()));
  for (std::size_t i = 0; i < items.size(); ++i) v(i) = parse_number(items[i], at);
  return v;
}

Matrix parse_matrix(const std::string& text, const Where& at) {
  const auto rows = bracket_items(text, at);
  if (rows.empty()) at.fail("matrix needs at least one row");
  std::vector<Vector> parsed;
  for (const auto& r : rows) {
    if (r.front() != '[') at.fail("matrix rows must be bracketed lists");
    parsed.push_back(parse_vector(r, at));
  }
  const Eigen::Index cols = parsed.front().size();
  Matrix M(static_cast<Eigen::Index>(parsed.size()), cols);
  for (std::size_t r = 0; r < parsed.size(); ++r) {
    if (parsed[r].size() != cols) at.fail("matrix rows have different lengths");
    M.row(static_cast<Eigen::Index>(r)) = parsed[r].transpose();
  }
  return M;
}

/// "name" or "name N" -> (name, N) with N one-based (0 when absent).
std::pair<std::string, int> split_indexed(const std::string& key, const Where& at) {
  const auto space = key.find(' ');
  if (space == std::string::npos) return {key, 0};
  const std::string name = trim(key.substr(0, space));
  const int index = parse_integer(key.substr(space + 1), at);
  if (index < 1) at.fail("agent numbers start at 1");
  return {name, index};
}

struct Entry {
  std::string value;
  int line;
};

struct Section {
  int line = 0;
  std::map<std::string, Entry> entries;
};

}  // namespace

Scenario parse_scenario(const std::string& text) {
  // Pass 1: split into sections of key/value entries.
  std::map<std::string, Section> sections;
  std::vector<std::string> section_order;
  std::string current;  // "" is the preamble
  sections[current].line = 0;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const Where at{line_no, ""};
    if (line.front() == '[') {
      if (line.back() != ']') at.fail("section header must end with ']'");
      std::string name = trim(line.substr(1, line.size() - 2));
      // normalize inner whitespace of "agent   2"
      std::istringstream words(name);
      std::string word, normalized;
      while (words >> word) normalized += (normalized.empty() ? "" : " ") + word;
      if (normalized.empty()) at.fail("empty section name");
      if (sections.count(normalized)) at.fail("duplicate section [" + normalized + "]");
      sections[normalized].line = line_no;
      section_order.push_back(normalized);
      current = normalized;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) at.fail("expected 'key = value'");
    std::istringstream kw(line.substr(0, eq));
    std::string word, key;
    while (kw >> word) key += (key.empty() ? "" : " ") + word;
    if (key.empty()) at.fail("missing key before '='");
    const std::string value = trim(line.substr(eq + 1));
    if (value.empty()) Where{line_no, key}.fail("missing value");
    auto& entries = sections[current].entries;
    if (entries.count(key)) Where{line_no, key}.fail("duplicate key");
    entries[key] = {value, line_no};
  }

  Scenario sc;
  std::set<std::string> used_sections{""};

  auto section = [&](const std::string& name) -> Section* {
    auto it = sections.find(name);
    if (it == sections.end()) return nullptr;
    used_sections.insert(name);
    return &it->second;
  };
  auto require_section = [&](const std::string& name) -> Section& {
    Section* s = section(name);
    if (!s) Where{line_no, ""}.fail("missing section [" + name + "]");
    return *s;
  };

  // Each section consumes its known keys; leftovers are reported.
  auto take = [](Section& s, const std::string& key) -> std::optional<Entry> {
    auto it = s.entries.find(key);
    if (it == s.entries.end()) return std::nullopt;
    Entry e = it->second;
    s.entries.erase(it);
    return e;
  };
  auto need = [&](Section& s, const std::string& sname, const std::string& key) -> Entry {
    auto e = take(s, key);
    if (!e) Where{s.line, key}.fail("missing in [" + sname + "]");
    return *e;
  };
  auto reject_leftovers = [](const Section& s, const std::string& sname) {
    if (!s.entries.empty()) {
      const auto& [key, e] = *s.entries.begin();
      Where{e.line, key}.fail("unknown key in [" + (sname.empty() ? "top level" : sname) + "]");
    }
  };

  // Top level.
  {
    Section& top = sections[""];
    const Entry e = need(top, "top level", "mode");
    const Where at{e.line, "mode"};
    if (e.value == "static-full-state") sc.mode = ScenarioMode::StaticFullState;
    else if (e.value == "dynamic-partial-state") sc.mode = ScenarioMode::DynamicPartialState;
    else if (e.value == "heterogeneous") sc.mode = ScenarioMode::Heterogeneous;
    else at.fail("unknown mode '" + e.value + "'");
    reject_leftovers(top, "");
  }

  // Network.
  {
    Section& net = require_section("network");
    const Entry w = need(net, "network", "weights");
    sc.weights = parse_matrix(w.value, {w.line, "weights"});
    const Entry b = need(net, "network", "beta");
    sc.beta = parse_number(b.value, {b.line, "beta"});
    if (auto a = take(net, "alpha")) sc.alpha = parse_number(a->value, {a->line, "alpha"});
    reject_leftovers(net, "network");
  }

  // Delays: "child <- parent = tau".
  if (Section* del = section("delays")) {
    for (const auto& [key, e] : del->entries) {
      const Where at{e.line, key};
      const auto arrow = key.find("<-");
      if (arrow == std::string::npos) at.fail("delay keys look like 'child <- parent'");
      const int child = parse_integer(key.substr(0, arrow), at);
      const int parent = parse_integer(key.substr(arrow + 2), at);
      if (child < 1 || parent < 1) at.fail("agent numbers start at 1");
      const double tau = parse_number(e.value, at);
      if (tau < 0.0) at.fail("delays must be nonnegative");
      if (!sc.delays.emplace(EdgeKey{child - 1, parent - 1}, tau).second) {
        at.fail("duplicate delay for this edge");
      }
    }
    del->entries.clear();
  }

  // Agents.
  auto read_agent = [&](Section& s, const std::string& name) {
    AgentModel m;
    const Entry a = need(s, name, "A");
    m.A = parse_matrix(a.value, {a.line, "A"});
    const Entry b = need(s, name, "B");
    m.B = parse_matrix(b.value, {b.line, "B"});
    if (auto c = take(s, "C")) {
      m.C = parse_matrix(c->value, {c->line, "C"});
    } else if (sc.mode == ScenarioMode::StaticFullState) {
      m.C = Matrix::Identity(m.A.rows(), m.A.rows());
    } else {
      Where{s.line, "C"}.fail("missing in [" + name + "]");
    }
    reject_leftovers(s, name);
    return m;
  };
  const int n_agents = static_cast<int>(sc.weights.rows());
  if (sc.mode == ScenarioMode::Heterogeneous) {
    for (int i = 1; i <= n_agents; ++i) {
      const std::string name = "agent " + std::to_string(i);
      sc.agents.push_back(read_agent(require_section(name), name));
    }
  } else {
    sc.agents.push_back(read_agent(require_section("agent"), "agent"));
  }

  // Design knobs.
  if (Section* d = section("design")) {
    if (auto e = take(*d, "Q")) sc.Q_design = parse_matrix(e->value, {e->line, "Q"});
    if (auto e = take(*d, "rho")) sc.rho = parse_number(e->value, {e->line, "rho"});
    if (auto e = take(*d, "delta_init")) {
      sc.delta_init = parse_number(e->value, {e->line, "delta_init"});
    }
    if (auto e = take(*d, "epsilon_init")) {
      sc.epsilon_init = parse_number(e->value, {e->line, "epsilon_init"});
    }
    if (auto e = take(*d, "nbar")) sc.nbar = parse_integer(e->value, {e->line, "nbar"});
    if (auto e = take(*d, "K")) sc.K = parse_matrix(e->value, {e->line, "K"});
    reject_leftovers(*d, "design");
  }

  // Simulation.
  if (Section* s = section("simulation")) {
    if (auto e = take(*s, "step")) sc.step = parse_number(e->value, {e->line, "step"});
    if (auto e = take(*s, "horizon")) sc.horizon = parse_number(e->value, {e->line, "horizon"});
    if (auto e = take(*s, "stride")) sc.stride = parse_integer(e->value, {e->line, "stride"});
    if (auto e = take(*s, "history")) {
      if (e->value == "constant") sc.history = HistoryPolicy::Constant;
      else if (e->value == "ramp") sc.history = HistoryPolicy::Ramp;
      else Where{e->line, "history"}.fail("expected 'constant' or 'ramp'");
    }
    if (auto e = take(*s, "frames")) {
      if (e->value == "delayed") sc.frames = FrameSelection::Delayed;
      else if (e->value == "transformed") sc.frames = FrameSelection::Transformed;
      else if (e->value == "both") sc.frames = FrameSelection::Both;
      else Where{e->line, "frames"}.fail("expected 'delayed', 'transformed' or 'both'");
    }
    if (auto e = take(*s, "pairs")) {
      if (e->value == "edges") sc.pairs = PairMode::TreeEdges;
      else if (e->value == "all") sc.pairs = PairMode::AllPairs;
      else Where{e->line, "pairs"}.fail("expected 'edges' or 'all'");
    }
    reject_leftovers(*s, "simulation");
    if (!(sc.step > 0.0)) Where{s->line, "step"}.fail("must be positive");
    if (!(sc.horizon > 0.0)) Where{s->line, "horizon"}.fail("must be positive");
    if (sc.stride < 1) Where{s->line, "stride"}.fail("must be at least 1");
  }

  // Initial states: "x N", "chi N", "slope N".
  {
    Section& init = require_section("init");
    std::map<int, Vector> xs, chis, slopes;
    for (const auto& [key, e] : init.entries) {
      const Where at{e.line, key};
      const auto [name, index] = split_indexed(key, at);
      if (index < 1 || index > n_agents) at.fail("expected 'x N' with 1 <= N <= agent count");
      std::map<int, Vector>* target = nullptr;
      if (name == "x") target = &xs;
      else if (name == "chi") target = &chis;
      else if (name == "slope") target = &slopes;
      else at.fail("unknown key in [init]");
      (*target)[index - 1] = parse_vector(e.value, at);
    }
    auto collect = [&](std::map<int, Vector>& m, const char* name, bool required) {
      std::vector<Vector> out;
      if (m.empty() && !required) return out;
      for (int i = 0; i < n_agents; ++i) {
        auto it = m.find(i);
        if (it == m.end()) {
          Where{init.line, std::string(name) + " " + std::to_string(i + 1)}.fail(
              "missing in [init]");
        }
        out.push_back(it->second);
      }
      return out;
    };
    sc.initial_states = collect(xs, "x", true);
    sc.controller_states = collect(chis, "chi", false);
    sc.history_slopes = collect(slopes, "slope", sc.history == HistoryPolicy::Ramp);
    if (!sc.controller_states.empty() && sc.mode != ScenarioMode::DynamicPartialState) {
      Where{init.line, "chi"}.fail("controller states only apply to dynamic-partial-state");
    }
    if (!sc.history_slopes.empty() && sc.history != HistoryPolicy::Ramp) {
      Where{init.line, "slope"}.fail("slopes require 'history = ramp'");
    }
  }

  if (Section* t = section("tolerances")) {
    if (auto e = take(*t, "terminal_error")) {
      sc.tolerances.terminal_error = parse_number(e->value, {e->line, "terminal_error"});
    }
    if (auto e = take(*t, "certificate_margin")) {
      sc.tolerances.certificate_margin = parse_number(e->value, {e->line, "certificate_margin"});
    }
    reject_leftovers(*t, "tolerances");
  }

  for (const auto& name : section_order) {
    if (!used_sections.count(name)) {
      Where{sections[name].line, ""}.fail("unknown section [" + name + "]");
    }
  }
  return sc;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::ParseError, "cannot read scenario file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

std::string serialize_scenario(const Scenario& sc) {
  std::ostringstream os;
  os << "mode = " << to_string(sc.mode) << "\n\n";
  os << "[network]\n";
  os << "weights = " << format_matrix(sc.weights) << '\n';
  os << "beta = " << format_double(sc.beta) << '\n';
  if (sc.alpha) os << "alpha = " << format_double(*sc.alpha) << '\n';
  os << "\n[delays]\n";
  for (const auto& [edge, tau] : sc.delays) {
    os << edge.first + 1 << " <- " << edge.second + 1 << " = " << format_double(tau) << '\n';
  }
  for (std::size_t i = 0; i < sc.agents.size(); ++i) {
    if (sc.mode == ScenarioMode::Heterogeneous) {
      os << "\n[agent " << i + 1 << "]\n";
    } else {
      os << "\n[agent]\n";
    }
    os << "A = " << format_matrix(sc.agents[i].A) << '\n';
    os << "B = " << format_matrix(sc.agents[i].B) << '\n';
    os << "C = " << format_matrix(sc.agents[i].C) << '\n';
  }
  os << "\n[design]\n";
  if (sc.Q_design) os << "Q = " << format_matrix(*sc.Q_design) << '\n';
  if (sc.rho) os << "rho = " << format_double(*sc.rho) << '\n';
  os << "delta_init = " << format_double(sc.delta_init) << '\n';
  os << "epsilon_init = " << format_double(sc.epsilon_init) << '\n';
  if (sc.nbar) os << "nbar = " << *sc.nbar << '\n';
  if (sc.K) os << "K = " << format_matrix(*sc.K) << '\n';
  os << "\n[simulation]\n";
  os << "step = " << format_double(sc.step) << '\n';
  os << "horizon = " << format_double(sc.horizon) << '\n';
  os << "stride = " << sc.stride << '\n';
  os << "history = " << (sc.history == HistoryPolicy::Ramp ? "ramp" : "constant") << '\n';
  os << "frames = "
     << (sc.frames == FrameSelection::Both
             ? "both"
             : sc.frames == FrameSelection::Delayed ? "delayed" : "transformed")
     << '\n';
  os << "pairs = " << (sc.pairs == PairMode::AllPairs ? "all" : "edges") << '\n';
  os << "\n[init]\n";
  for (std::size_t i = 0; i < sc.initial_states.size(); ++i) {
    os << "x " << i + 1 << " = " << format_vector(sc.initial_states[i]) << '\n';
  }
  for (std::size_t i = 0; i < sc.controller_states.size(); ++i) {
    os << "chi " << i + 1 << " = " << format_vector(sc.controller_states[i]) << '\n';
  }
  for (std::size_t i = 0; i < sc.history_slopes.size(); ++i) {
    os << "slope " << i + 1 << " = " << format_vector(sc.history_slopes[i]) << '\n';
  }
  os << "\n[tolerances]\n";
  os << "terminal_error = " << format_double(sc.tolerances.terminal_error) << '\n';
  os << "certificate_margin = " << format_double(sc.tolerances.certificate_margin) << '\n';
  return os.str();
}

}  // namespace delaysync
