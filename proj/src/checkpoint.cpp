#include "textgan/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace textgan {

namespace {

constexpr const char* kMagic = "textgan-checkpoint v1";

void put_f32_le(std::string& out, float v) {
    const uint32_t bits = std::bit_cast<uint32_t>(v);
    out.push_back(static_cast<char>(bits & 0xff));
    out.push_back(static_cast<char>((bits >> 8) & 0xff));
    out.push_back(static_cast<char>((bits >> 16) & 0xff));
    out.push_back(static_cast<char>((bits >> 24) & 0xff));
}

float get_f32_le(const unsigned char* p) {
    const uint32_t bits = static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
                          (static_cast<uint32_t>(p[2]) << 16) |
                          (static_cast<uint32_t>(p[3]) << 24);
    return std::bit_cast<float>(bits);
}

std::string double_repr(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

const Tensor& LoadedCheckpoint::tensor(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw FormatError("checkpoint: missing tensor '" + name + "'");
    return it->second;
}

void save_checkpoint(const std::string& path, const RunConfig& cfg, const CheckpointMeta& meta,
                     const Vocabulary& vocab, const NamedTensors& tensors) {
    std::ostringstream manifest;
    manifest << kMagic << "\n";
    manifest << "[config]\n" << serialize_config(cfg);
    manifest << "\n[state]\n";
    manifest << "phase = " << meta.phase << "\n";
    manifest << "iteration = " << meta.iteration << "\n";
    manifest << "variant = " << meta.variant << "\n";
    manifest << "baseline = " << double_repr(meta.baseline) << "\n";
    manifest << "baseline_init = " << (meta.baseline_init ? 1 : 0) << "\n";
    manifest << "adam_steps_g = " << meta.adam_steps_g << "\n";
    manifest << "adam_steps_d = " << meta.adam_steps_d << "\n";
    manifest << "\n[vocab]\n";
    manifest << "kind = " << (vocab.is_synthetic() ? "synthetic" : "list") << "\n";
    manifest << "size = " << vocab.size() << "\n";
    if (!vocab.is_synthetic()) {
        for (int id = kReservedTokens; id < vocab.size(); ++id) {
            manifest << vocab.token(id) << "\n";
        }
    }
    manifest << "\n[tensors]\n";
    int64_t offset = 0;
    for (const auto& [name, t] : tensors) {
        manifest << name << " ";
        for (int i = 0; i < t.ndim(); ++i) {
            if (i) manifest << ",";
            manifest << t.dim(i);
        }
        manifest << " " << offset << " " << t.numel() << "\n";
        offset += t.numel();
    }
    manifest << "[payload]\n";

    std::string payload;
    payload.reserve(static_cast<size_t>(offset) * 4);
    for (const auto& [name, t] : tensors) {
        (void)name;
        for (float v : t.data()) put_f32_le(payload, v);
    }

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write checkpoint: " + path);
    const std::string head = manifest.str();
    out.write(head.data(), static_cast<std::streamsize>(head.size()));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) throw FormatError("short write to checkpoint: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open checkpoint: " + path);
    std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    const std::string payload_tag = "[payload]\n";
    const size_t payload_at = blob.find(payload_tag);
    if (blob.rfind(kMagic, 0) != 0 || payload_at == std::string::npos) {
        throw FormatError("not a textgan checkpoint: " + path);
    }
    const size_t payload_begin = payload_at + payload_tag.size();

    std::istringstream manifest(blob.substr(0, payload_at));
    std::string line, section;
    std::getline(manifest, line);  // magic

    LoadedCheckpoint ck;
    std::ostringstream config_text;
    std::vector<std::pair<std::string, std::string>> state_kv;
    std::vector<std::string> vocab_lines;
    struct Entry {
        std::string name;
        Shape shape;
        int64_t offset;
        int64_t count;
    };
    std::vector<Entry> entries;

    while (std::getline(manifest, line)) {
        if (!line.empty() && line.front() == '[' && line.back() == ']') {
            section = line.substr(1, line.size() - 2);
            continue;
        }
        if (section == "config") {
            config_text << line << "\n";
        } else if (section == "state") {
            const size_t eq = line.find('=');
            if (eq != std::string::npos) {
                auto trim = [](std::string s) {
                    const size_t a = s.find_first_not_of(" \t");
                    const size_t b = s.find_last_not_of(" \t\r");
                    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
                };
                state_kv.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
            }
        } else if (section == "vocab") {
            if (!line.empty()) vocab_lines.push_back(line);
        } else if (section == "tensors") {
            if (line.empty()) continue;
            std::istringstream row(line);
            Entry e;
            std::string shape_field;
            if (!(row >> e.name >> shape_field >> e.offset >> e.count)) {
                throw FormatError("checkpoint: bad tensor index line '" + line + "'");
            }
            std::istringstream dims(shape_field);
            std::string d;
            while (std::getline(dims, d, ',')) e.shape.push_back(std::stoi(d));
            entries.push_back(std::move(e));
        }
    }

    {
        std::istringstream cfg_in(config_text.str());
        ck.config = parse_config(cfg_in);
    }
    for (const auto& [k, v] : state_kv) {
        if (k == "phase") ck.meta.phase = v;
        else if (k == "iteration") ck.meta.iteration = std::stoi(v);
        else if (k == "variant") ck.meta.variant = v;
        else if (k == "baseline") ck.meta.baseline = std::stod(v);
        else if (k == "baseline_init") ck.meta.baseline_init = v == "1";
        else if (k == "adam_steps_g") ck.meta.adam_steps_g = std::stoll(v);
        else if (k == "adam_steps_d") ck.meta.adam_steps_d = std::stoll(v);
    }

    // Vocab block: "kind = ..." then "size = N" then token lines.
    std::string kind;
    int vsize = 0;
    std::vector<std::string> tokens;
    for (const std::string& vl : vocab_lines) {
        const size_t eq = vl.find('=');
        if (eq != std::string::npos && vl.find(' ') != std::string::npos &&
            (vl.rfind("kind", 0) == 0 || vl.rfind("size", 0) == 0)) {
            const std::string key = vl.substr(0, vl.find(' '));
            std::string value = vl.substr(eq + 1);
            while (!value.empty() && value.front() == ' ') value.erase(value.begin());
            if (key == "kind") kind = value;
            else if (key == "size") vsize = std::stoi(value);
        } else {
            tokens.push_back(vl);
        }
    }
    if (kind == "synthetic") {
        ck.vocab = Vocabulary::synthetic(vsize);
    } else {
        ck.vocab = Vocabulary::from_tokens(tokens);
        if (ck.vocab.size() != vsize) {
            throw FormatError("checkpoint: vocabulary size mismatch");
        }
    }

    const size_t payload_bytes = blob.size() - payload_begin;
    for (const Entry& e : entries) {
        if ((static_cast<size_t>(e.offset) + static_cast<size_t>(e.count)) * 4 > payload_bytes) {
            throw FormatError("checkpoint: payload too short for tensor '" + e.name + "'");
        }
        std::vector<float> data(static_cast<size_t>(e.count));
        const unsigned char* base = reinterpret_cast<const unsigned char*>(blob.data()) +
                                    payload_begin + static_cast<size_t>(e.offset) * 4;
        for (int64_t i = 0; i < e.count; ++i) {
            data[static_cast<size_t>(i)] = get_f32_le(base + i * 4);
        }
        ck.tensors.emplace(e.name, Tensor::from(e.shape, std::move(data)));
    }
    return ck;
}

}  // namespace textgan
