#include "puctmusic/remi/midi.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iterator>
#include <optional>
#include <tuple>

#include "puctmusic/error.hpp"

namespace puctmusic::remi {

namespace {

class ByteReader {
public:
    ByteReader(std::span<const std::uint8_t> bytes, std::size_t begin, std::size_t end)
        : bytes_(bytes), pos_(begin), end_(end) {}

    bool done() const noexcept { return pos_ >= end_; }
    std::size_t offset() const noexcept { return pos_; }

    std::uint8_t u8() {
        if (pos_ >= end_) throw MalformedMidi(pos_, "unexpected end of data");
        return bytes_[pos_++];
    }
    std::uint8_t peek() const {
        if (pos_ >= end_) throw MalformedMidi(pos_, "unexpected end of data");
        return bytes_[pos_];
    }
    std::uint32_t u16() {
        std::uint32_t hi = u8();
        return (hi << 8) | u8();
    }
    std::uint32_t u32() {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v = (v << 8) | u8();
        return v;
    }
    std::uint32_t vlq() {
        const std::size_t at = pos_;
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            const std::uint8_t b = u8();
            v = (v << 7) | (b & 0x7F);
            if (!(b & 0x80)) return v;
        }
        throw MalformedMidi(at, "variable-length quantity longer than 4 bytes");
    }
    std::span<const std::uint8_t> take(std::size_t n) {
        if (end_ - pos_ < n) throw MalformedMidi(pos_, "length runs past end of chunk");
        auto s = bytes_.subspan(pos_, n);
        pos_ += n;
        return s;
    }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_;
    std::size_t end_;
};

enum class EventType { NoteOff, Marker, Tempo, TimeSignature, NoteOn };

struct RawEvent {
    std::int64_t tick;
    EventType type;
    int track;
    int order;
    int pitch = 0;
    int velocity = 0;
    std::uint32_t micros_per_quarter = 0;
    int numerator = 4;
    int denominator = 4;
    bool bar_marker = false;
};

int sort_rank(EventType t) {
    switch (t) {
        case EventType::NoteOff: return 0;
        case EventType::Marker: return 1;
        case EventType::TimeSignature: return 2;
        case EventType::Tempo: return 3;
        case EventType::NoteOn: return 4;
    }
    return 5;
}

void parse_track(ByteReader& in, int track, std::vector<RawEvent>& events, std::int64_t& last_tick) {
    std::int64_t tick = 0;
    std::uint8_t running = 0;
    int order = 0;
    while (!in.done()) {
        tick += in.vlq();
        last_tick = std::max(last_tick, tick);
        std::uint8_t status = in.peek();
        if (status & 0x80) {
            in.u8();
        } else {
            if (!running) throw MalformedMidi(in.offset(), "data byte without running status");
            status = running;
        }

        if (status == 0xFF) {
            const std::size_t at = in.offset();
            const std::uint8_t type = in.u8();
            const auto data = in.take(in.vlq());
            if (type == 0x2F) return;
            if (type == 0x51) {
                if (data.size() != 3) throw MalformedMidi(at, "tempo event must carry 3 bytes");
                RawEvent e{tick, EventType::Tempo, track, order++};
                e.micros_per_quarter = (std::uint32_t{data[0]} << 16) | (std::uint32_t{data[1]} << 8) | data[2];
                if (e.micros_per_quarter == 0) throw MalformedMidi(at, "zero tempo");
                events.push_back(e);
            } else if (type == 0x58) {
                if (data.size() < 2) throw MalformedMidi(at, "time signature event too short");
                RawEvent e{tick, EventType::TimeSignature, track, order++};
                e.numerator = data[0];
                e.denominator = 1 << std::min<int>(data[1], 8);
                events.push_back(e);
            } else if (type == 0x06) {
                RawEvent e{tick, EventType::Marker, track, order++};
                e.bar_marker = std::string(data.begin(), data.end()) == "bar";
                events.push_back(e);
            }
            continue;
        }
        if (status == 0xF0 || status == 0xF7) {
            in.take(in.vlq());
            continue;
        }
        if (status >= 0xF0) throw MalformedMidi(in.offset() - 1, "unsupported system message");

        running = status;
        const std::uint8_t high = status & 0xF0;
        const int data_bytes = (high == 0xC0 || high == 0xD0) ? 1 : 2;
        const std::size_t at = in.offset();
        std::array<std::uint8_t, 2> data{};
        for (int i = 0; i < data_bytes; ++i) {
            data[static_cast<std::size_t>(i)] = in.u8();
            if (data[static_cast<std::size_t>(i)] & 0x80) throw MalformedMidi(at + static_cast<std::size_t>(i), "data byte with high bit set");
        }
        if (high == 0x90 && data[1] > 0) {
            RawEvent e{tick, EventType::NoteOn, track, order++};
            e.pitch = data[0];
            e.velocity = data[1];
            events.push_back(e);
        } else if (high == 0x80 || high == 0x90) {
            RawEvent e{tick, EventType::NoteOff, track, order++};
            e.pitch = data[0];
            events.push_back(e);
        }
    }
    throw MalformedMidi(in.offset(), "track ended without end-of-track event");
}

std::string four_four_warning(int num, int den, std::int64_t tick) {
    return "time signature " + std::to_string(num) + "/" + std::to_string(den) + " at tick " +
           std::to_string(tick) + "; importing onto the 4/4 grid";
}

}  // namespace

MidiImport parse_midi(std::span<const std::uint8_t> bytes) {
    ByteReader head(bytes, 0, bytes.size());
    if (bytes.size() < 14) throw MalformedMidi(0, "file too short for a header chunk");
    const auto magic = head.take(4);
    if (!std::equal(magic.begin(), magic.end(), "MThd")) throw MalformedMidi(0, "missing MThd header");
    const std::uint32_t header_len = head.u32();
    if (header_len < 6) throw MalformedMidi(4, "header chunk shorter than 6 bytes");
    const std::uint32_t format = head.u16();
    head.u16();  // declared track count; we read whatever tracks are present
    const std::uint32_t division = head.u16();
    if (format > 1) throw MalformedMidi(8, "format " + std::to_string(format) + " is not supported");
    if (division & 0x8000) throw MalformedMidi(12, "SMPTE time division is not supported");
    if (division == 0) throw MalformedMidi(12, "zero ticks per quarter");
    head.take(header_len - 6);

    std::vector<RawEvent> events;
    std::int64_t last_tick = 0;
    int track = 0;
    while (!head.done()) {
        const std::size_t chunk_at = head.offset();
        const auto id = head.take(4);
        const std::uint32_t len = head.u32();
        if (bytes.size() - head.offset() < len) throw MalformedMidi(chunk_at, "chunk length runs past end of file");
        if (std::equal(id.begin(), id.end(), "MTrk")) {
            ByteReader in(bytes, head.offset(), head.offset() + len);
            parse_track(in, track++, events, last_tick);
        }
        head.take(len);
    }
    if (track == 0) throw MalformedMidi(bytes.size(), "no MTrk chunk");

    std::stable_sort(events.begin(), events.end(), [](const RawEvent& a, const RawEvent& b) {
        return std::make_tuple(a.tick, sort_rank(a.type), a.track, a.order) <
               std::make_tuple(b.tick, sort_rank(b.type), b.track, b.order);
    });

    auto rescale = [division](std::int64_t tick) {
        return static_cast<int>((tick * kTicksPerBeat + division / 2) / division);
    };
    auto snap = [](int ticks) { return quantize_to_step(ticks) * kTicksPerStep; };

    MidiImport out;
    struct Open {
        int onset;
        int velocity;
    };
    std::array<std::optional<Open>, 128> open{};
    int bars_from_markers = 0;

    auto close = [&](int pitch, int end_tick) {
        auto& o = open[static_cast<std::size_t>(pitch)];
        if (!o) return;
        const int onset = snap(o->onset);
        const int end = snap(end_tick);
        out.piece.notes.push_back({onset, std::max(kTicksPerStep, end - onset), pitch, std::clamp(o->velocity, 1, 127)});
        o.reset();
    };

    for (const auto& e : events) {
        const int t = rescale(e.tick);
        switch (e.type) {
            case EventType::NoteOn:
                close(e.pitch, t);
                open[static_cast<std::size_t>(e.pitch)] = Open{t, e.velocity};
                break;
            case EventType::NoteOff:
                close(e.pitch, t);
                break;
            case EventType::Tempo: {
                const double bpm = std::round(60'000'000.0 / e.micros_per_quarter * 100.0) / 100.0;
                const int tick = snap(t);
                auto& tc = out.piece.tempo_changes;
                if (!tc.empty() && tc.back().tick == tick) {
                    tc.back().bpm = bpm;
                } else {
                    tc.push_back({tick, bpm});
                }
                break;
            }
            case EventType::TimeSignature:
                if (e.numerator != 4 || e.denominator != 4) {
                    out.four_four = false;
                    out.warnings.push_back(four_four_warning(e.numerator, e.denominator, e.tick));
                }
                break;
            case EventType::Marker:
                if (e.bar_marker) bars_from_markers = std::max(bars_from_markers, snap(t) / kTicksPerBar + 1);
                break;
        }
    }
    const int end_tick = rescale(last_tick);
    for (int p = 0; p < 128; ++p) close(p, end_tick);

    out.piece.sort();
    int bars = bars_from_markers;
    for (const auto& n : out.piece.notes) bars = std::max(bars, n.onset_ticks / kTicksPerBar + 1);
    out.piece.bars = bars;
    return out;
}

MidiImport read_midi(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("error reading '" + path.string() + "'");
    return parse_midi(bytes);
}

namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

void put_vlq(std::vector<std::uint8_t>& out, std::uint32_t v) {
    std::array<std::uint8_t, 5> buf{};
    int n = 0;
    buf[static_cast<std::size_t>(n++)] = v & 0x7F;
    while (v >>= 7) buf[static_cast<std::size_t>(n++)] = static_cast<std::uint8_t>((v & 0x7F) | 0x80);
    while (n) out.push_back(buf[static_cast<std::size_t>(--n)]);
}

struct OutEvent {
    int tick;
    int rank;
    int key;
    std::vector<std::uint8_t> bytes;
};

}  // namespace

std::vector<std::uint8_t> encode_midi(const Piece& piece) {
    std::vector<OutEvent> events;
    int bars = std::max(piece.bars, 0);
    for (const auto& n : piece.notes) bars = std::max(bars, n.onset_ticks / kTicksPerBar + 1);

    events.push_back({0, 2, 0, {0xFF, 0x58, 0x04, 0x04, 0x02, 0x18, 0x08}});
    for (int b = 0; b < bars; ++b) {
        events.push_back({b * kTicksPerBar, 1, 0, {0xFF, 0x06, 0x03, 'b', 'a', 'r'}});
    }
    for (const auto& tc : piece.tempo_changes) {
        const auto us = static_cast<std::uint32_t>(std::lround(60'000'000.0 / tc.bpm));
        events.push_back({tc.tick, 3, 0,
                          {0xFF, 0x51, 0x03, static_cast<std::uint8_t>(us >> 16), static_cast<std::uint8_t>(us >> 8),
                           static_cast<std::uint8_t>(us)}});
    }
    for (const auto& n : piece.notes) {
        const auto pitch = static_cast<std::uint8_t>(std::clamp(n.pitch, 0, 127));
        const auto vel = static_cast<std::uint8_t>(std::clamp(n.velocity, 1, 127));
        events.push_back({n.onset_ticks, 4, pitch, {0x90, pitch, vel}});
        events.push_back({n.onset_ticks + std::max(n.duration_ticks, 1), 0, pitch, {0x80, pitch, 0x00}});
    }
    std::stable_sort(events.begin(), events.end(), [](const OutEvent& a, const OutEvent& b) {
        return std::tie(a.tick, a.rank, a.key) < std::tie(b.tick, b.rank, b.key);
    });

    std::vector<std::uint8_t> track;
    int now = 0;
    for (const auto& e : events) {
        put_vlq(track, static_cast<std::uint32_t>(e.tick - now));
        now = e.tick;
        track.insert(track.end(), e.bytes.begin(), e.bytes.end());
    }
    put_vlq(track, 0);
    track.insert(track.end(), {0xFF, 0x2F, 0x00});

    std::vector<std::uint8_t> out = {'M', 'T', 'h', 'd'};
    put_u32(out, 6);
    put_u16(out, 0);
    put_u16(out, 1);
    put_u16(out, kTicksPerBeat);
    out.insert(out.end(), {'M', 'T', 'r', 'k'});
    put_u32(out, static_cast<std::uint32_t>(track.size()));
    out.insert(out.end(), track.begin(), track.end());
    return out;
}

void write_midi(const Piece& piece, const std::filesystem::path& path) {
    const auto bytes = encode_midi(piece);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("error writing '" + path.string() + "'");
}

}  // namespace puctmusic::remi
