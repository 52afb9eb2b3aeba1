#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cdqac/errors.hpp"
#include "cdqac/instance.hpp"

namespace cdqac {
namespace {

struct Line {
  int number;
  std::vector<std::string_view> tokens;
};

std::vector<Line> tokenize(std::string_view text) {
  std::vector<Line> lines;
  int number = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    ++number;
    std::string_view raw = text.substr(pos, end - pos);
    Line line{number, {}};
    std::size_t i = 0;
    while (i < raw.size()) {
      while (i < raw.size() && (raw[i] == ' ' || raw[i] == '\t' || raw[i] == '\r')) ++i;
      std::size_t j = i;
      while (j < raw.size() && raw[j] != ' ' && raw[j] != '\t' && raw[j] != '\r') ++j;
      if (j > i) line.tokens.push_back(raw.substr(i, j - i));
      i = j;
    }
    if (!line.tokens.empty()) lines.push_back(std::move(line));
    if (end == text.size()) break;
    pos = end + 1;
  }
  return lines;
}

int to_int(std::string_view tok, int line) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
    throw ParseError(line, "expected an integer, got '" + std::string(tok) + "'");
  }
  return value;
}

bool is_integer(std::string_view tok) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  return ec == std::errc{} && ptr == tok.data() + tok.size();
}

std::string format_flexibility(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", value);
  std::string s(buf);
  while (!s.empty() && s.back() == '0') s.pop_back();
  if (!s.empty() && s.back() == '.') s.pop_back();
  return s;
}

Instance parse_taillard_matrix(const std::vector<Line>& lines) {
  std::size_t i = 0;
  while (i < lines.size() && !is_integer(lines[i].tokens[0])) ++i;
  if (i >= lines.size() || lines[i].tokens.size() < 2) {
    throw ParseError(lines.empty() ? 1 : lines.back().number, "missing 'n m' header");
  }
  const int n = to_int(lines[i].tokens[0], lines[i].number);
  const int m = to_int(lines[i].tokens[1], lines[i].number);
  if (n < 1 || m < 1) throw ParseError(lines[i].number, "n and m must be positive");
  ++i;
  auto read_block = [&](std::string_view keyword) {
    while (i < lines.size() && lines[i].tokens[0] != keyword) ++i;
    if (i >= lines.size()) throw ParseError(lines.back().number, "missing '" + std::string(keyword) + "' block");
    ++i;
    std::vector<std::vector<int>> rows;
    for (int r = 0; r < n; ++r, ++i) {
      if (i >= lines.size()) throw ParseError(lines.back().number, "truncated matrix");
      if (static_cast<int>(lines[i].tokens.size()) != m) {
        throw ParseError(lines[i].number, "expected " + std::to_string(m) + " values");
      }
      std::vector<int> row;
      for (auto tok : lines[i].tokens) row.push_back(to_int(tok, lines[i].number));
      rows.push_back(std::move(row));
    }
    return std::pair{rows, i};
  };
  auto [times, times_end] = read_block("Times");
  const std::size_t machines_start = times_end;
  auto [machines, machines_end] = read_block("Machines");
  (void)machines_end;
  std::vector<Job> jobs(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    const int line_no = lines[machines_start + static_cast<std::size_t>(j) + 1].number;
    std::vector<bool> seen(static_cast<std::size_t>(m), false);
    for (int o = 0; o < m; ++o) {
      const int machine = machines[static_cast<std::size_t>(j)][static_cast<std::size_t>(o)] - 1;
      const int time = times[static_cast<std::size_t>(j)][static_cast<std::size_t>(o)];
      if (machine < 0 || machine >= m) throw ParseError(line_no, "machine index out of range");
      if (seen[static_cast<std::size_t>(machine)]) throw ParseError(line_no, "machine row is not a permutation");
      seen[static_cast<std::size_t>(machine)] = true;
      if (time < 1) throw ParseError(line_no, "processing time must be positive");
      jobs[static_cast<std::size_t>(j)].operations.emplace_back(std::vector<MachineTime>{{machine, time}});
    }
  }
  return Instance(ProblemKind::jsp, m, std::move(jobs));
}

}  // namespace

Instance parse_standard_fjsp(std::string_view text) {
  const auto lines = tokenize(text);
  if (lines.empty()) throw ParseError(1, "empty input");
  const auto& header = lines.front();
  if (header.tokens.size() < 2) throw ParseError(header.number, "header must be 'n m [flexibility]'");
  const int n = to_int(header.tokens[0], header.number);
  const int m = to_int(header.tokens[1], header.number);
  if (n < 1 || m < 1) throw ParseError(header.number, "n and m must be positive");
  if (static_cast<int>(lines.size()) - 1 < n) {
    throw ParseError(lines.back().number + 1, "expected " + std::to_string(n) + " job lines");
  }
  std::vector<Job> jobs;
  for (int j = 0; j < n; ++j) {
    const auto& line = lines[static_cast<std::size_t>(j) + 1];
    const auto& tok = line.tokens;
    std::size_t k = 0;
    auto next = [&](const char* what) {
      if (k >= tok.size()) throw ParseError(line.number, std::string("truncated line: missing ") + what);
      return to_int(tok[k++], line.number);
    };
    const int n_ops = next("operation count");
    if (n_ops < 1) throw ParseError(line.number, "job needs at least one operation");
    Job job;
    for (int o = 0; o < n_ops; ++o) {
      const int n_machines = next("machine count");
      if (n_machines < 1) throw ParseError(line.number, "operation needs at least one machine");
      std::vector<MachineTime> eligible;
      for (int e = 0; e < n_machines; ++e) {
        const int machine = next("machine index");
        const int time = next("processing time");
        if (machine < 1 || machine > m) {
          throw ParseError(line.number, "machine index " + std::to_string(machine) + " outside [1," + std::to_string(m) + "]");
        }
        if (time < 1) throw ParseError(line.number, "non-positive processing time");
        for (const auto& prev : eligible) {
          if (prev.machine == machine - 1) throw ParseError(line.number, "duplicate machine in operation");
        }
        eligible.push_back({machine - 1, time});
      }
      job.operations.emplace_back(std::move(eligible));
    }
    if (k != tok.size()) throw ParseError(line.number, "trailing tokens after job definition");
    jobs.push_back(std::move(job));
  }
  return Instance(ProblemKind::fjsp, m, std::move(jobs));
}

Instance parse_taillard_jsp(std::string_view text, TaillardOptions options) {
  const auto lines = tokenize(text);
  if (lines.empty()) throw ParseError(1, "empty input");
  for (const auto& line : lines) {
    if (line.tokens[0] == "Times") return parse_taillard_matrix(lines);
  }
  const auto& header = lines.front();
  if (header.tokens.size() != 2) throw ParseError(header.number, "header must be 'n m'");
  const int n = to_int(header.tokens[0], header.number);
  const int m = to_int(header.tokens[1], header.number);
  if (n < 1 || m < 1) throw ParseError(header.number, "n and m must be positive");
  if (static_cast<int>(lines.size()) - 1 != n) {
    throw ParseError(lines.back().number, "expected " + std::to_string(n) + " job lines, found " +
                                              std::to_string(lines.size() - 1));
  }
  std::vector<Job> jobs;
  for (int j = 0; j < n; ++j) {
    const auto& line = lines[static_cast<std::size_t>(j) + 1];
    if (static_cast<int>(line.tokens.size()) != 2 * m) {
      throw ParseError(line.number, "expected " + std::to_string(2 * m) + " values (machine/time pairs)");
    }
    std::vector<bool> seen(static_cast<std::size_t>(m), false);
    Job job;
    for (int o = 0; o < m; ++o) {
      const int machine = to_int(line.tokens[2 * static_cast<std::size_t>(o)], line.number) - options.machine_base;
      const int time = to_int(line.tokens[2 * static_cast<std::size_t>(o) + 1], line.number);
      if (machine < 0 || machine >= m) throw ParseError(line.number, "machine index out of range");
      if (seen[static_cast<std::size_t>(machine)]) throw ParseError(line.number, "machine row is not a permutation");
      seen[static_cast<std::size_t>(machine)] = true;
      if (time < 1) throw ParseError(line.number, "processing time must be positive");
      job.operations.emplace_back(std::vector<MachineTime>{{machine, time}});
    }
    jobs.push_back(std::move(job));
  }
  return Instance(ProblemKind::jsp, m, std::move(jobs));
}

std::string serialize_fjsp(const Instance& instance) {
  std::ostringstream out;
  out << instance.num_jobs() << ' ' << instance.num_machines() << ' '
      << format_flexibility(instance.average_flexibility()) << '\n';
  for (const auto& job : instance.jobs()) {
    out << job.operations.size();
    for (const auto& op : job.operations) {
      out << ' ' << op.eligible().size();
      for (const auto& e : op.eligible()) out << ' ' << e.machine + 1 << ' ' << e.time;
    }
    out << '\n';
  }
  return out.str();
}

std::string serialize_taillard(const Instance& instance) {
  if (instance.kind() != ProblemKind::jsp) throw ContractViolation("serialize_taillard: instance is not JSP");
  std::ostringstream out;
  out << instance.num_jobs() << ' ' << instance.num_machines() << '\n';
  for (const auto& job : instance.jobs()) {
    bool first = true;
    for (const auto& op : job.operations) {
      const auto& e = op.eligible().front();
      if (!first) out << ' ';
      out << e.machine << ' ' << e.time;
      first = false;
    }
    out << '\n';
  }
  return out.str();
}

std::string serialize(const Instance& instance) {
  return instance.kind() == ProblemKind::jsp ? serialize_taillard(instance) : serialize_fjsp(instance);
}

Instance parse_instance(std::string_view text, ProblemKind kind) {
  return kind == ProblemKind::jsp ? parse_taillard_jsp(text) : parse_standard_fjsp(text);
}

Instance load_instance(const std::string& path, std::optional<ProblemKind> kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open instance file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  if (!kind) {
    const bool fjs_ext = path.size() >= 4 && path.compare(path.size() - 4, 4, ".fjs") == 0;
    if (fjs_ext) {
      kind = ProblemKind::fjsp;
    } else {
      try {
        auto inst = parse_taillard_jsp(text);
        auto slash = path.find_last_of('/');
        inst.set_name(path.substr(slash == std::string::npos ? 0 : slash + 1));
        return inst;
      } catch (const ParseError&) {
        kind = ProblemKind::fjsp;
      }
    }
  }
  auto inst = parse_instance(text, *kind);
  auto slash = path.find_last_of('/');
  auto base = path.substr(slash == std::string::npos ? 0 : slash + 1);
  inst.set_name(base);
  return inst;
}

void save_instance(const Instance& instance, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write instance file '" + path + "'");
  out << serialize(instance);
}

}  // namespace cdqac
