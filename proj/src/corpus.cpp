#include "deskmt/corpus.hpp"

#include <fstream>
#include <sstream>

#include "deskmt/errors.hpp"
#include "deskmt/hash.hpp"

namespace deskmt {

namespace {

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

void write_lines(const std::filesystem::path& path, const std::vector<SentencePair>& pairs,
                 bool source_side) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  for (const auto& p : pairs) out << join(source_side ? p.source : p.target) << '\n';
}

}  // namespace

std::string_view to_string(Domain d) {
  return d == Domain::generic ? "generic" : "in-domain";
}

Sentence tokenize(std::string_view line) {
  Sentence out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) out.emplace_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string join(const Sentence& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

ParallelCorpus load_parallel(const std::filesystem::path& source_path,
                             const std::filesystem::path& target_path, std::string name,
                             Domain domain) {
  const auto src = read_lines(source_path);
  const auto tgt = read_lines(target_path);
  if (src.size() != tgt.size()) {
    throw AlignmentError("parallel files are not aligned: " + std::to_string(src.size()) +
                         " vs " + std::to_string(tgt.size()) + " lines");
  }
  ParallelCorpus corpus{name.empty() ? source_path.stem().string() : std::move(name), domain, {}};
  corpus.pairs.reserve(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    SentencePair pair{tokenize(src[i]), tokenize(tgt[i])};
    if (pair.source.empty() || pair.target.empty()) {
      throw FormatError("empty line " + std::to_string(i + 1) + " in " +
                        (pair.source.empty() ? source_path : target_path).string());
    }
    corpus.pairs.push_back(std::move(pair));
  }
  return corpus;
}

void save_parallel(const ParallelCorpus& corpus, const std::filesystem::path& source_path,
                   const std::filesystem::path& target_path) {
  write_lines(source_path, corpus.pairs, true);
  write_lines(target_path, corpus.pairs, false);
}

std::vector<ParallelCorpus> slice(const ParallelCorpus& corpus, const SliceSpec& spec) {
  std::vector<ParallelCorpus> out;
  std::size_t previous = 0;
  for (std::size_t k = 0; k < spec.sizes.size(); ++k) {
    const std::size_t n = spec.sizes[k];
    if (n > corpus.size()) {
      throw RangeError("slice size " + std::to_string(n) + " exceeds corpus length " +
                       std::to_string(corpus.size()));
    }
    if (k > 0 && n <= previous) throw RangeError("slice sizes must be strictly increasing");
    previous = n;
    ParallelCorpus part{corpus.name + "-" + std::to_string(n), corpus.domain, {}};
    part.pairs.assign(corpus.pairs.begin(), corpus.pairs.begin() + static_cast<std::ptrdiff_t>(n));
    out.push_back(std::move(part));
  }
  return out;
}

std::pair<ParallelCorpus, ParallelCorpus> split_heldout(const ParallelCorpus& corpus,
                                                        std::size_t n) {
  if (n > 0 && n >= corpus.size()) {
    throw RangeError("held-out size " + std::to_string(n) + " must be below corpus length " +
                     std::to_string(corpus.size()));
  }
  const auto cut = corpus.pairs.begin() + static_cast<std::ptrdiff_t>(corpus.size() - n);
  ParallelCorpus train{corpus.name + "-train", corpus.domain, {corpus.pairs.begin(), cut}};
  ParallelCorpus test{corpus.name + "-test", corpus.domain, {cut, corpus.pairs.end()}};
  return {std::move(train), std::move(test)};
}

ParallelCorpus concat(const ParallelCorpus& first, const ParallelCorpus& second,
                      std::string name) {
  ParallelCorpus out{std::move(name), first.domain, first.pairs};
  out.pairs.insert(out.pairs.end(), second.pairs.begin(), second.pairs.end());
  return out;
}

std::string corpus_hash(const ParallelCorpus& corpus) {
  std::ostringstream text;
  for (const auto& p : corpus.pairs) text << join(p.source) << '\t' << join(p.target) << '\n';
  return sha256_hex(text.str());
}

}  // namespace deskmt
