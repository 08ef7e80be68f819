#!/usr/bin/env python3
"""Minimal tshark-lookalike used by the ingest tests.

Reads a classic pcap and emits either `-T fields` tab-separated output or
`-T json` in the layer shape the ingest code expects. The parsing here is an
independent implementation (struct-based), so agreement with the library's
parser is a real cross-check rather than a tautology.
"""
import argparse
import json
import struct
import sys


def parse_pcap(path):
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < 24:
        raise SystemExit("truncated pcap")
    magic = struct.unpack("<I", blob[:4])[0]
    if magic == 0xA1B2C3D4:
        endian, scale = "<", 1e-6
    elif magic == 0xA1B23C4D:
        endian, scale = "<", 1e-9
    elif magic == 0xD4C3B2A1:
        endian, scale = ">", 1e-6
    else:
        raise SystemExit("bad magic")
    linktype = struct.unpack(endian + "I", blob[20:24])[0] & 0x0FFFFFFF
    pos = 24
    while pos + 16 <= len(blob):
        sec, frac, caplen, _ = struct.unpack(endian + "IIII", blob[pos:pos + 16])
        pos += 16
        data = blob[pos:pos + caplen]
        pos += caplen
        yield sec + frac * scale, linktype, data


def dissect(ts, linktype, data):
    fields = {"frame.time_epoch": repr(ts)}
    off = 0
    if linktype == 1:
        if len(data) < 14 or struct.unpack("!H", data[12:14])[0] != 0x0800:
            return fields
        off = 14
    if len(data) < off + 20 or data[off] >> 4 != 4:
        return fields
    ihl = (data[off] & 0x0F) * 4
    ip = data[off:]
    total_len = struct.unpack("!H", ip[2:4])[0]
    fields["ip.len"] = str(total_len)
    fields["ip.id"] = "0x%04x" % struct.unpack("!H", ip[4:6])[0]
    fields["ip.ttl"] = str(ip[8])
    fields["ip.checksum"] = "0x%04x" % struct.unpack("!H", ip[10:12])[0]
    fields["ip.src"] = ".".join(str(b) for b in ip[12:16])
    fields["ip.dst"] = ".".join(str(b) for b in ip[16:20])
    proto = ip[9]
    t = ip[ihl:]
    if proto == 6 and len(t) >= 20:
        sport, dport, seq, ack = struct.unpack("!HHII", t[:12])
        doff = (t[12] >> 4) * 4
        fields["tcp.srcport"] = str(sport)
        fields["tcp.dstport"] = str(dport)
        fields["tcp.seq_raw"] = str(seq)
        fields["tcp.ack_raw"] = str(ack)
        fields["tcp.flags"] = "0x%04x" % t[13]
        fields["tcp.window_size"] = str(struct.unpack("!H", t[14:16])[0])
        fields["tcp.checksum"] = "0x%04x" % struct.unpack("!H", t[16:18])[0]
        o = 20
        while o < doff and o < len(t):
            kind = t[o]
            if kind == 0:
                break
            if kind == 1:
                o += 1
                continue
            if o + 1 >= doff:
                break
            olen = t[o + 1]
            if olen < 2:
                break
            if kind == 8 and olen == 10:
                tsval, tsecr = struct.unpack("!II", t[o + 2:o + 10])
                fields["tcp.options.timestamp.tsval"] = str(tsval)
                fields["tcp.options.timestamp.tsecr"] = str(tsecr)
            o += olen
        fields["tcp.len"] = str(max(0, min(total_len, len(ip)) - ihl - doff))
    elif proto == 17 and len(t) >= 8:
        sport, dport, ulen, ck = struct.unpack("!HHHH", t[:8])
        fields["udp.srcport"] = str(sport)
        fields["udp.dstport"] = str(dport)
        fields["udp.length"] = str(ulen)
        fields["udp.checksum"] = "0x%04x" % ck
    return fields


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("-r", required=True)
    ap.add_argument("-T", default="fields")
    ap.add_argument("-E", default="separator=/t")
    ap.add_argument("-e", action="append", default=[])
    args, _ = ap.parse_known_args()

    packets = [dissect(ts, lt, d) for ts, lt, d in parse_pcap(args.r)]
    if args.T == "json":
        doc = [{"_source": {"layers": f}} for f in packets]
        json.dump(doc, sys.stdout)
        sys.stdout.write("\n")
    else:
        sep = "\t" if args.E.endswith("/t") else args.E.split("=", 1)[1]
        for f in packets:
            sys.stdout.write(sep.join(f.get(e, "") for e in args.e) + "\n")


if __name__ == "__main__":
    main()
