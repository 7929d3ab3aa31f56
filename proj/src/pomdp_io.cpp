// Plain-text POMDP model files.
//
//   # comment
//   discount: 0.95
//   states: tiger-left tiger-right
//   actions: listen open-left open-right
//   observations: hear-left hear-right
//   start: 0.5 0.5              (optional, defaults to uniform)
//   T: listen                   (one block per action: |S| rows of |S|, row = s)
//   1 0
//   0 1
//   O: listen                   (one block per action: |S| rows of |O|, row = s')
//   0.85 0.15
//   0.15 0.85
//   R:                          (|S| rows of |A|)
//   -1 -100 10
//   -1 10 -100

#include <algorithm>
#include <charconv>
#include <iomanip>
#include <limits>
#include <sstream>

#include "tddm/pomdp.hpp"

namespace tddm::pomdp {

namespace {

struct Line {
  int number = 0;
  std::vector<std::string> words;
};

[[noreturn]] void fail(int line, const std::string& what) {
  throw ConfigError("model line " + std::to_string(line) + ": " + what);
}

double to_double(const std::string& word, int line) {
  double v = 0.0;
  const auto* end = word.data() + word.size();
  const auto [ptr, ec] = std::from_chars(word.data(), end, v);
  if (ec != std::errc() || ptr != end) fail(line, "expected a number, got '" + word + "'");
  return v;
}

std::vector<double> to_row(const Line& line, std::size_t expected) {
  if (line.words.size() != expected) {
    fail(line.number, "expected " + std::to_string(expected) + " entries, got " +
                          std::to_string(line.words.size()));
  }
  std::vector<double> row;
  for (const auto& w : line.words) row.push_back(to_double(w, line.number));
  return row;
}

std::size_t index_of(const std::vector<std::string>& names, const std::string& name, int line,
                     const char* kind) {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) fail(line, std::string("unknown ") + kind + " '" + name + "'");
  return static_cast<std::size_t>(it - names.begin());
}

}  // namespace

ModelFile parse_model(std::istream& in) {
  std::vector<Line> lines;
  std::string text;
  int number = 0;
  while (std::getline(in, text)) {
    ++number;
    if (const auto hash = text.find('#'); hash != std::string::npos) text.erase(hash);
    std::istringstream words(text);
    Line line{number, {}};
    for (std::string w; words >> w;) line.words.push_back(w);
    if (!line.words.empty()) lines.push_back(std::move(line));
  }

  TabularPomdp::Tables t;
  std::optional<std::vector<double>> start;
  bool have_discount = false;
  std::vector<bool> have_t, have_o;
  bool have_r = false;

  auto need_sets = [&](int line) {
    if (t.states.empty() || t.actions.empty() || t.observations.empty()) {
      fail(line, "states, actions and observations must be declared before tables");
    }
    if (have_t.empty()) {
      const std::size_t na = t.actions.size();
      have_t.assign(na, false);
      have_o.assign(na, false);
      t.transition.assign(na, {});
      t.observation.assign(na, {});
    }
  };

  for (std::size_t i = 0; i < lines.size(); ++i) {
    const Line& line = lines[i];
    const std::string& key = line.words[0];
    std::vector<std::string> rest(line.words.begin() + 1, line.words.end());
    if (key == "discount:") {
      if (rest.size() != 1) fail(line.number, "discount takes one value");
      t.discount = to_double(rest[0], line.number);
      have_discount = true;
    } else if (key == "states:" || key == "actions:" || key == "observations:") {
      if (rest.empty()) fail(line.number, key + " needs at least one name");
      auto& target = key == "states:" ? t.states : key == "actions:" ? t.actions : t.observations;
      if (!target.empty()) fail(line.number, "duplicate " + key);
      target = rest;
    } else if (key == "start:") {
      start = to_row(Line{line.number, rest}, rest.size());
    } else if (key == "T:" || key == "O:") {
      need_sets(line.number);
      if (rest.size() != 1) fail(line.number, key + " takes one action name");
      const std::size_t a = index_of(t.actions, rest[0], line.number, "action");
      auto& seen = key == "T:" ? have_t : have_o;
      if (seen[a]) fail(line.number, "duplicate " + key + " block for action " + rest[0]);
      seen[a] = true;
      const std::size_t cols = key == "T:" ? t.states.size() : t.observations.size();
      auto& table = key == "T:" ? t.transition[a] : t.observation[a];
      for (std::size_t s = 0; s < t.states.size(); ++s) {
        if (++i >= lines.size()) fail(line.number, "table truncated");
        table.push_back(to_row(lines[i], cols));
      }
    } else if (key == "R:") {
      need_sets(line.number);
      if (have_r) fail(line.number, "duplicate R: block");
      have_r = true;
      for (std::size_t s = 0; s < t.states.size(); ++s) {
        if (++i >= lines.size()) fail(line.number, "table truncated");
        t.reward.push_back(to_row(lines[i], t.actions.size()));
      }
    } else {
      fail(line.number, "unknown keyword '" + key + "'");
    }
  }

  const int last = lines.empty() ? 0 : lines.back().number;
  if (!have_discount) fail(last, "missing discount:");
  need_sets(last);
  for (std::size_t a = 0; a < t.actions.size(); ++a) {
    if (!have_t[a]) fail(last, "missing T: block for action " + t.actions[a]);
    if (!have_o[a]) fail(last, "missing O: block for action " + t.actions[a]);
  }
  if (!have_r) fail(last, "missing R: block");

  try {
    ModelFile file{TabularPomdp(std::move(t)), std::nullopt};
    if (start) file.start = BeliefState(*start);
    if (file.start && file.start->size() != file.model.num_states()) {
      fail(last, "start belief size does not match states");
    }
    return file;
  } catch (const ContractViolation& e) {
    throw ConfigError(std::string("invalid model: ") + e.what());
  }
}

std::string format_model(const TabularPomdp& m) {
  const auto& t = m.tables();
  std::ostringstream out;
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  auto names = [&](const char* key, const std::vector<std::string>& v) {
    out << key;
    for (const auto& n : v) out << ' ' << n;
    out << '\n';
  };
  auto row = [&](const std::vector<double>& r) {
    for (std::size_t i = 0; i < r.size(); ++i) out << (i ? " " : "") << r[i];
    out << '\n';
  };
  out << "discount: " << t.discount << '\n';
  names("states:", t.states);
  names("actions:", t.actions);
  names("observations:", t.observations);
  for (std::size_t a = 0; a < t.actions.size(); ++a) {
    out << "T: " << t.actions[a] << '\n';
    for (const auto& r : t.transition[a]) row(r);
  }
  for (std::size_t a = 0; a < t.actions.size(); ++a) {
    out << "O: " << t.actions[a] << '\n';
    for (const auto& r : t.observation[a]) row(r);
  }
  out << "R:\n";
  for (const auto& r : t.reward) row(r);
  return out.str();
}

}  // namespace tddm::pomdp
