#include "textgan/data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace textgan {

namespace {

std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream is(line);
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
}

const char* reserved_name(int id) {
    switch (id) {
        case kPadId: return "<pad>";
        case kBosId: return "<bos>";
        case kEosId: return "<eos>";
        default: return "<unk>";
    }
}

}  // namespace

Vocabulary Vocabulary::build(const std::vector<std::string>& lines, int max_size) {
    if (max_size < kReservedTokens + 1) {
        throw ContractError("Vocabulary: max_size must leave room beyond reserved ids");
    }
    std::map<std::string, int64_t> counts;
    for (const std::string& line : lines) {
        for (const std::string& tok : split_ws(line)) ++counts[tok];
    }
    if (counts.empty()) throw ContractError("Vocabulary: empty corpus");

    std::vector<std::pair<std::string, int64_t>> ranked(counts.begin(), counts.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;  // frequency ties break lexicographically
    });

    Vocabulary v;
    for (int id = 0; id < kReservedTokens; ++id) v.id_to_token_.push_back(reserved_name(id));
    const size_t keep = static_cast<size_t>(max_size - kReservedTokens);
    for (size_t i = 0; i < ranked.size() && i < keep; ++i) {
        v.id_to_token_.push_back(ranked[i].first);
    }
    v.rebuild_lookup();
    return v;
}

Vocabulary Vocabulary::synthetic(int size) {
    if (size < kReservedTokens + 1) throw ContractError("Vocabulary: synthetic size too small");
    Vocabulary v;
    v.synthetic_ = true;
    for (int id = 0; id < kReservedTokens; ++id) v.id_to_token_.push_back(reserved_name(id));
    for (int id = kReservedTokens; id < size; ++id) {
        v.id_to_token_.push_back("w" + std::to_string(id));
    }
    v.rebuild_lookup();
    return v;
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& regular_tokens) {
    Vocabulary v;
    for (int id = 0; id < kReservedTokens; ++id) v.id_to_token_.push_back(reserved_name(id));
    for (const std::string& tok : regular_tokens) v.id_to_token_.push_back(tok);
    v.rebuild_lookup();
    return v;
}

void Vocabulary::rebuild_lookup() {
    sorted_lookup_.clear();
    sorted_lookup_.reserve(id_to_token_.size());
    for (size_t id = kReservedTokens; id < id_to_token_.size(); ++id) {
        sorted_lookup_.emplace_back(id_to_token_[id], static_cast<int>(id));
    }
    std::sort(sorted_lookup_.begin(), sorted_lookup_.end());
}

int Vocabulary::token_id(const std::string& token) const {
    auto it = std::lower_bound(sorted_lookup_.begin(), sorted_lookup_.end(), token,
                               [](const auto& p, const std::string& t) { return p.first < t; });
    if (it != sorted_lookup_.end() && it->first == token) return it->second;
    return kUnkId;
}

const std::string& Vocabulary::token(int id) const {
    if (id < 0 || id >= size()) {
        throw IndexError("Vocabulary: id " + std::to_string(id) + " out of range");
    }
    return id_to_token_[static_cast<size_t>(id)];
}

std::vector<int> Vocabulary::encode(const std::string& sentence, int max_len) const {
    std::vector<int> ids;
    for (const std::string& tok : split_ws(sentence)) {
        if (static_cast<int>(ids.size()) >= max_len - 1) break;  // room for eos
        ids.push_back(token_id(tok));
    }
    ids.push_back(kEosId);
    return ids;
}

std::string Vocabulary::decode(const std::vector<int>& ids) const {
    std::string out;
    for (int id : ids) {
        if (id == kEosId || id == kPadId) break;
        if (id == kBosId) continue;
        if (!out.empty()) out += ' ';
        out += token(id);
    }
    return out;
}

SequenceBatch SequenceBatch::empty(int max_len) {
    SequenceBatch b;
    b.max_len = max_len;
    return b;
}

SequenceBatch SequenceBatch::from_rows(const std::vector<std::vector<int>>& content_rows,
                                       int max_len) {
    SequenceBatch b;
    b.batch = static_cast<int>(content_rows.size());
    b.max_len = max_len;
    b.tokens.assign(static_cast<size_t>(b.batch) * max_len, kPadId);
    b.lengths.resize(content_rows.size());
    for (size_t r = 0; r < content_rows.size(); ++r) {
        const auto& row = content_rows[r];
        if (static_cast<int>(row.size()) > max_len) {
            throw ContractError("SequenceBatch: row of " + std::to_string(row.size()) +
                                " tokens exceeds max_len " + std::to_string(max_len));
        }
        b.lengths[r] = static_cast<int>(row.size());
        for (size_t t = 0; t < row.size(); ++t) {
            b.tokens[r * static_cast<size_t>(max_len) + t] = row[t];
        }
        if (static_cast<int>(row.size()) < max_len) {
            b.tokens[r * static_cast<size_t>(max_len) + row.size()] = kEosId;
        }
    }
    return b;
}

std::vector<int> SequenceBatch::content_row(int row) const {
    std::vector<int> out;
    out.reserve(static_cast<size_t>(length(row)));
    for (int t = 0; t < length(row); ++t) out.push_back(at(row, t));
    return out;
}

SequenceBatch SequenceBatch::rows(const std::vector<int>& indices) const {
    SequenceBatch b;
    b.batch = static_cast<int>(indices.size());
    b.max_len = max_len;
    b.tokens.reserve(indices.size() * static_cast<size_t>(max_len));
    for (int i : indices) {
        if (i < 0 || i >= batch) throw IndexError("SequenceBatch::rows: bad index");
        b.lengths.push_back(length(i));
        for (int t = 0; t < max_len; ++t) b.tokens.push_back(at(i, t));
    }
    return b;
}

SequenceBatch SequenceBatch::take(int begin, int count) const {
    std::vector<int> idx(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) idx[static_cast<size_t>(i)] = begin + i;
    return rows(idx);
}

void SequenceBatch::validate(int vocab_size) const {
    if (static_cast<int64_t>(tokens.size()) != static_cast<int64_t>(batch) * max_len ||
        static_cast<int>(lengths.size()) != batch) {
        throw ContractError("SequenceBatch: inconsistent buffer sizes");
    }
    for (int r = 0; r < batch; ++r) {
        const int len = length(r);
        if (len < 0 || len > max_len) {
            throw ContractError("SequenceBatch: length out of range at row " + std::to_string(r));
        }
        for (int t = 0; t < max_len; ++t) {
            const int id = at(r, t);
            if (id < 0 || id >= vocab_size) {
                throw IndexError("SequenceBatch: token id " + std::to_string(id) +
                                 " outside vocabulary of " + std::to_string(vocab_size));
            }
            if (t < len && id == kPadId) {
                throw ContractError("SequenceBatch: pad inside content at row " + std::to_string(r));
            }
            if (t == len && len < max_len && id != kEosId) {
                throw ContractError("SequenceBatch: missing eos at row " + std::to_string(r));
            }
            if (t > len && id != kPadId) {
                throw ContractError("SequenceBatch: non-pad after eos at row " + std::to_string(r));
            }
        }
    }
}

Oracle::Oracle(const OracleSpec& spec) : spec_(spec) {
    Rng rng = Rng::derive(spec.seed, "oracle-params");
    embedding_ = Tensor::randn({spec.vocab_size, spec.d_model}, rng, 1.0f);
    lstm_.w_ih = Tensor::randn({spec.d_model, 4 * spec.d_model}, rng, 1.0f);
    lstm_.w_hh = Tensor::randn({spec.d_model, 4 * spec.d_model}, rng, 1.0f);
    lstm_.bias = Tensor::randn({4 * spec.d_model}, rng, 1.0f);
    head_w_ = Tensor::randn({spec.d_model, spec.vocab_size}, rng, 1.0f);
    head_b_ = Tensor::randn({spec.vocab_size}, rng, 1.0f);
}

namespace {

// Reserved-masked log softmax of one logits row, computed in double.
std::vector<double> masked_log_softmax(const Tensor& logits_row, int vocab) {
    std::vector<double> lp(static_cast<size_t>(vocab), -1e30);
    double mx = -1e300;
    for (int i = kReservedTokens; i < vocab; ++i) {
        mx = std::max(mx, static_cast<double>(logits_row.data()[static_cast<size_t>(i)]));
    }
    double denom = 0.0;
    for (int i = kReservedTokens; i < vocab; ++i) {
        denom += std::exp(static_cast<double>(logits_row.data()[static_cast<size_t>(i)]) - mx);
    }
    const double lse = mx + std::log(denom);
    for (int i = kReservedTokens; i < vocab; ++i) {
        lp[static_cast<size_t>(i)] = static_cast<double>(logits_row.data()[static_cast<size_t>(i)]) - lse;
    }
    return lp;
}

}  // namespace

SequenceBatch Oracle::generate(int n) const {
    if (n < 1) throw ContractError("Oracle::generate: n must be >= 1");
    Rng rng = Rng::derive(spec_.seed, "oracle-sample");
    std::vector<std::vector<int>> rows;
    rows.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        std::vector<int> row;
        row.reserve(static_cast<size_t>(spec_.seq_len));
        layers::LstmState state = layers::LstmState::zero(spec_.d_model);
        int prev = kBosId;
        for (int t = 0; t < spec_.seq_len; ++t) {
            state = layers::lstm_step(ops::embedding_rows(embedding_, {prev}), state, lstm_);
            Tensor logits = ops::add_bias(ops::matmul(state.h, head_w_), head_b_);
            const std::vector<double> lp = masked_log_softmax(logits, spec_.vocab_size);
            std::vector<float> probs(static_cast<size_t>(spec_.vocab_size), 0.0f);
            for (int v = kReservedTokens; v < spec_.vocab_size; ++v) {
                probs[static_cast<size_t>(v)] = static_cast<float>(std::exp(lp[static_cast<size_t>(v)]));
            }
            prev = ops::multinomial_sample(probs, rng);
            row.push_back(prev);
        }
        rows.push_back(std::move(row));
    }
    return SequenceBatch::from_rows(rows, spec_.seq_len);
}

double Oracle::nll(const SequenceBatch& batch) const {
    if (batch.batch < 1) throw ContractError("Oracle::nll: empty batch");
    double total = 0.0;
    for (int r = 0; r < batch.batch; ++r) {
        layers::LstmState state = layers::LstmState::zero(spec_.d_model);
        int prev = kBosId;
        double sentence = 0.0;
        for (int t = 0; t < batch.length(r); ++t) {
            state = layers::lstm_step(ops::embedding_rows(embedding_, {prev}), state, lstm_);
            Tensor logits = ops::add_bias(ops::matmul(state.h, head_w_), head_b_);
            const std::vector<double> lp = masked_log_softmax(logits, spec_.vocab_size);
            const int tok = batch.at(r, t);
            sentence -= lp[static_cast<size_t>(tok)];
            prev = tok;
        }
        total += sentence;
    }
    return total / batch.batch;
}

EmbeddingLoadResult load_embeddings(std::istream& in, const Vocabulary& vocab, int d, Rng& rng) {
    EmbeddingLoadResult result;
    result.table = Tensor::zeros({vocab.size(), d});
    std::vector<uint8_t> covered(static_cast<size_t>(vocab.size()), 0);

    std::string line;
    int line_no = 0;
    bool first = true;
    while (std::getline(in, line)) {
        ++line_no;
        std::vector<std::string> parts = split_ws(line);
        if (parts.empty()) continue;
        if (first) {
            first = false;
            // Optional "count dim" header.
            if (parts.size() == 2) {
                int count = 0, dim = 0;
                auto r1 = std::from_chars(parts[0].data(), parts[0].data() + parts[0].size(), count);
                auto r2 = std::from_chars(parts[1].data(), parts[1].data() + parts[1].size(), dim);
                if (r1.ec == std::errc{} && r2.ec == std::errc{}) {
                    if (dim != d) {
                        throw FormatError("embeddings line 1: header dimension " +
                                          std::to_string(dim) + " does not match expected " +
                                          std::to_string(d));
                    }
                    continue;
                }
            }
        }
        if (static_cast<int>(parts.size()) != d + 1) {
            throw FormatError("embeddings line " + std::to_string(line_no) + ": expected token + " +
                              std::to_string(d) + " values, got " +
                              std::to_string(parts.size() - 1));
        }
        std::vector<float> row(static_cast<size_t>(d));
        for (int i = 0; i < d; ++i) {
            try {
                size_t used = 0;
                row[static_cast<size_t>(i)] = std::stof(parts[static_cast<size_t>(i + 1)], &used);
                if (used != parts[static_cast<size_t>(i + 1)].size()) throw std::invalid_argument("");
            } catch (const std::exception&) {
                throw FormatError("embeddings line " + std::to_string(line_no) +
                                  ": bad number '" + parts[static_cast<size_t>(i + 1)] + "'");
            }
        }
        const int id = vocab.token_id(parts[0]);
        const bool real_match = id >= kReservedTokens && vocab.token(id) == parts[0];
        if (real_match && !covered[static_cast<size_t>(id)]) {
            covered[static_cast<size_t>(id)] = 1;
            ++result.loaded;
            for (int i = 0; i < d; ++i) result.table.at(id, i) = row[static_cast<size_t>(i)];
        }
    }

    // Uncovered rows (and bos/eos/unk) start from small gaussian noise; the pad
    // row stays zero.
    for (int id = kBosId; id < vocab.size(); ++id) {
        if (id >= kReservedTokens && covered[static_cast<size_t>(id)]) continue;
        for (int i = 0; i < d; ++i) result.table.at(id, i) = rng.normal(0.0f, 0.1f);
    }
    const int non_reserved = vocab.size() - kReservedTokens;
    result.coverage = non_reserved > 0 ? static_cast<double>(result.loaded) / non_reserved : 0.0;
    return result;
}

EmbeddingLoadResult load_embeddings_file(const std::string& path, const Vocabulary& vocab,
                                         int d, Rng& rng) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open embeddings file: " + path);
    return load_embeddings(in, vocab, d, rng);
}

BatchIterator::BatchIterator(const SequenceBatch& data, int batch_size, uint64_t seed)
    : data_(&data), batch_size_(batch_size), rng_(Rng::derive(seed, "batch-iter")) {
    if (batch_size < 1) throw ContractError("BatchIterator: batch_size must be >= 1");
    if (data.batch < 1) throw ContractError("BatchIterator: empty dataset");
    order_.resize(static_cast<size_t>(data.batch));
    reshuffle();
}

void BatchIterator::reshuffle() {
    for (size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<int>(i);
    for (size_t i = order_.size(); i > 1; --i) {
        const size_t j = static_cast<size_t>(rng_.uniform_int(0, static_cast<int>(i)));
        std::swap(order_[i - 1], order_[j]);
    }
    cursor_ = 0;
}

SequenceBatch BatchIterator::next() {
    if (cursor_ >= order_.size()) reshuffle();
    const size_t take = std::min(static_cast<size_t>(batch_size_), order_.size() - cursor_);
    std::vector<int> idx(order_.begin() + static_cast<int64_t>(cursor_),
                         order_.begin() + static_cast<int64_t>(cursor_ + take));
    cursor_ += take;
    return data_->rows(idx);
}

void BatchIterator::skip(int64_t batches) {
    for (int64_t i = 0; i < batches; ++i) {
        if (cursor_ >= order_.size()) reshuffle();
        cursor_ = std::min(cursor_ + static_cast<size_t>(batch_size_), order_.size());
    }
}

int BatchIterator::batches_per_epoch() const {
    return static_cast<int>((data_->batch + batch_size_ - 1) / batch_size_);
}

std::vector<std::string> read_corpus_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open corpus file: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        for (char& c : line) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        bool blank = true;
        for (char c : line) {
            if (!std::isspace(static_cast<unsigned char>(c))) {
                blank = false;
                break;
            }
        }
        if (!blank) lines.push_back(line);
    }
    if (lines.empty()) throw ConfigError("corpus file is empty: " + path);
    return lines;
}

SequenceBatch encode_corpus(const Vocabulary& vocab, const std::vector<std::string>& lines,
                            int max_len) {
    std::vector<std::vector<int>> rows;
    rows.reserve(lines.size());
    for (const std::string& line : lines) {
        std::vector<int> ids = vocab.encode(line, max_len);
        ids.pop_back();  // from_rows re-appends the eos terminator
        rows.push_back(std::move(ids));
    }
    return SequenceBatch::from_rows(rows, max_len);
}

}  // namespace textgan
