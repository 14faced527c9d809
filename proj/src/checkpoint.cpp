#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "lanp/training.hpp"

namespace lanp {

namespace {

constexpr char kMagic[8] = {'L', 'A', 'N', 'P', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

std::uint32_t crc32_ieee(const unsigned char* data, std::size_t len) {
    static const auto table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    std::uint32_t crc = 0xFFFFFFFFu;
    for (std::size_t i = 0; i < len; ++i) crc = table[(crc ^ data[i]) & 0xFFu] ^ (crc >> 8);
    return crc ^ 0xFFFFFFFFu;
}

template <class T>
void write_le(std::string& out, T v) {
    unsigned char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = (unsigned char)(v >> (8 * i));
    out.append((const char*)buf, sizeof(T));
}

class Reader {
public:
    Reader(std::string bytes, const std::string& path)
        : bytes_(std::move(bytes)), path_(path) {}

    std::size_t offset() const { return pos_; }

    const char* take(std::size_t n) {
        if (pos_ + n > bytes_.size())
            throw DataError("checkpoint '" + path_ + "': truncated at offset " +
                            std::to_string(pos_));
        const char* p = bytes_.data() + pos_;
        pos_ += n;
        return p;
    }

    template <class T>
    T read_le() {
        const unsigned char* p = (const unsigned char*)take(sizeof(T));
        T v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) v |= (T)p[i] << (8 * i);
        return v;
    }

    bool exhausted() const { return pos_ == bytes_.size(); }

private:
    std::string bytes_;
    std::string path_;
    std::size_t pos_ = 0;
};

// iteration and RNG state ride along in the config block under trainer.* keys
std::string compose_config_block(const Checkpoint& ckpt) {
    std::string block = ckpt.config_text;
    if (!block.empty() && block.back() != '\n') block += '\n';
    block += "trainer.iteration=" + std::to_string(ckpt.iteration) + "\n";
    block += "trainer.rng=" + ckpt.rng_state + "\n";
    return block;
}

void split_config_block(const std::string& block, Checkpoint& ckpt) {
    ckpt.config_text.clear();
    std::size_t pos = 0;
    while (pos < block.size()) {
        std::size_t end = block.find('\n', pos);
        bool had_newline = end != std::string::npos;
        if (!had_newline) end = block.size();
        std::string line = block.substr(pos, end - pos);
        if (line.rfind("trainer.iteration=", 0) == 0) {
            ckpt.iteration = std::stoll(line.substr(18));
        } else if (line.rfind("trainer.rng=", 0) == 0) {
            ckpt.rng_state = line.substr(12);
        } else {
            ckpt.config_text += line;
            if (had_newline) ckpt.config_text += '\n';
        }
        pos = end + 1;
    }
}

} // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::string out;
    out.append(kMagic, sizeof(kMagic));
    write_le<std::uint32_t>(out, kVersion);
    const std::string config = compose_config_block(ckpt);
    write_le<std::uint64_t>(out, config.size());
    out += config;

    write_le<std::uint32_t>(out, (std::uint32_t)ckpt.params.size());
    std::string payload;
    for (const auto& [name, t] : ckpt.params) {
        write_le<std::uint16_t>(out, (std::uint16_t)name.size());
        out += name;
        const auto& shape = t.shape();
        out.push_back((char)(unsigned char)shape.size());
        for (std::size_t d : shape) write_le<std::uint64_t>(out, (std::uint64_t)d);
        write_le<std::uint64_t>(out, (std::uint64_t)payload.size());
        for (std::size_t i = 0; i < t.numel(); ++i) {
            std::uint64_t bits;
            double v = t[i];
            std::memcpy(&bits, &v, sizeof(bits));
            write_le<std::uint64_t>(payload, bits);
        }
    }
    out += payload;
    write_le<std::uint32_t>(out, crc32_ieee((const unsigned char*)payload.data(), payload.size()));

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("checkpoint: cannot open '" + path + "' for writing");
    f.write(out.data(), (std::streamsize)out.size());
    if (!f) throw IoError("checkpoint: write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("checkpoint: cannot open '" + path + "'");
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    Reader r(std::move(bytes), path);

    if (std::memcmp(r.take(8), kMagic, 8) != 0)
        throw DataError("checkpoint '" + path + "': bad magic at offset 0");
    const std::uint32_t version = r.read_le<std::uint32_t>();
    if (version != kVersion)
        throw DataError("checkpoint '" + path + "': unsupported version " +
                        std::to_string(version) + " at offset 8");

    const std::uint64_t config_len = r.read_le<std::uint64_t>();
    std::string config(r.take(config_len), config_len);

    struct Entry {
        std::string name;
        std::vector<std::size_t> dims;
        std::uint64_t offset;
        std::size_t count;
    };
    const std::uint32_t n_entries = r.read_le<std::uint32_t>();
    std::vector<Entry> entries;
    std::uint64_t expected_offset = 0;
    for (std::uint32_t i = 0; i < n_entries; ++i) {
        Entry e;
        const std::uint16_t name_len = r.read_le<std::uint16_t>();
        e.name.assign(r.take(name_len), name_len);
        const unsigned rank = (unsigned char)*r.take(1);
        e.count = 1;
        for (unsigned d = 0; d < rank; ++d) {
            std::uint64_t dim = r.read_le<std::uint64_t>();
            e.dims.push_back((std::size_t)dim);
            e.count *= (std::size_t)dim;
        }
        e.offset = r.read_le<std::uint64_t>();
        if (e.offset != expected_offset)
            throw DataError("checkpoint '" + path + "': manifest offset mismatch for '" +
                            e.name + "' at offset " + std::to_string(r.offset()));
        expected_offset += e.count * sizeof(double);
        entries.push_back(std::move(e));
    }

    const char* payload = r.take(expected_offset);
    const std::uint32_t stored_crc = r.read_le<std::uint32_t>();
    const std::uint32_t actual_crc =
        crc32_ieee((const unsigned char*)payload, expected_offset);
    if (stored_crc != actual_crc)
        throw DataError("checkpoint '" + path + "': payload checksum mismatch (stored " +
                        std::to_string(stored_crc) + ", computed " +
                        std::to_string(actual_crc) + ") at offset " +
                        std::to_string(r.offset() - 4));
    if (!r.exhausted())
        throw DataError("checkpoint '" + path + "': trailing bytes at offset " +
                        std::to_string(r.offset()));

    Checkpoint ckpt;
    split_config_block(config, ckpt);
    for (const Entry& e : entries) {
        Tensor t(e.dims);
        const unsigned char* src = (const unsigned char*)payload + e.offset;
        for (std::size_t i = 0; i < e.count; ++i) {
            std::uint64_t bits = 0;
            for (std::size_t b = 0; b < 8; ++b) bits |= (std::uint64_t)src[i * 8 + b] << (8 * b);
            double v;
            std::memcpy(&v, &bits, sizeof(v));
            t[i] = v;
        }
        ckpt.params.add(e.name, std::move(t));
    }
    return ckpt;
}

} // namespace lanp
