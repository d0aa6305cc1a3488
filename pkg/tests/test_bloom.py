import json
import math
import random
from pathlib import Path

import pytest
from scipy import stats

from p4filter.bloom import DEFAULT_M, BloomFilter, BloomPair, bloom_hash
from p4filter.packet import FlowKey, Ipv4Address

FIXTURES = Path(__file__).parent / "fixtures"


def fk(a_host, b_host, a_port, b_port):
    return FlowKey(Ipv4Address(bytes([10, 0, a_host // 256, a_host % 256])),
                   Ipv4Address(bytes([10, 1, b_host // 256, b_host % 256])),
                   a_port, b_port)


class TestHashConformance:
    def test_published_vectors(self):
        vectors = json.loads(
            (FIXTURES / "bloom_hash_vectors.json").read_text())["vectors"]
        assert len(vectors) == 32
        for v in vectors:
            a_ip, b_ip, a_port, b_port = v["key"]
            key = FlowKey(Ipv4Address.from_text(a_ip),
                          Ipv4Address.from_text(b_ip), a_port, b_port)
            assert bloom_hash(key, v["hash_id"], v["m"]) == v["expected_index"], v

    def test_deterministic(self):
        key = fk(1, 2, 1000, 80)
        assert bloom_hash(key, 1, DEFAULT_M) == bloom_hash(key, 1, DEFAULT_M)
        assert bloom_hash(key, 2, DEFAULT_M) == bloom_hash(key, 2, DEFAULT_M)

    def test_hash_ids_disagree(self):
        key = fk(1, 2, 1000, 80)
        wide = 1 << 48
        assert bloom_hash(key, 1, wide) != bloom_hash(key, 2, wide)

    def test_neighbour_keys_disagree(self):
        wide = 1 << 48
        base = bloom_hash(fk(1, 2, 1000, 80), 1, wide)
        for other in [fk(1, 2, 1001, 80), fk(1, 2, 1000, 81),
                      fk(2, 1, 1000, 80), fk(1, 3, 1000, 80)]:
            assert bloom_hash(other, 1, wide) != base

    def test_m_must_be_power_of_two(self):
        with pytest.raises(ValueError):
            bloom_hash(fk(1, 2, 1000, 80), 1, 1000)

    def test_uniformity(self):
        """Chi-square over 2^8 buckets for 10^5 sequential flow keys; a
        grossly non-uniform index function fails at p < 0.01."""
        m = 256
        counts = [0] * m
        for n in range(100_000):
            key = fk(n % 500, n // 500, 1024 + n % 60000, 80)
            counts[bloom_hash(key, 1, m)] += 1
        _, p = stats.chisquare(counts)
        assert p > 0.01


class TestBloomFilter:
    def test_m_must_be_power_of_two(self):
        for bad in (0, 3, 1000, -4096):
            with pytest.raises(ValueError):
                BloomFilter(m=bad, hash_id=1)
        BloomFilter(m=1, hash_id=1)

    def test_no_false_negatives(self):
        f = BloomFilter(m=DEFAULT_M, hash_id=1)
        keys = [fk(n % 300, n // 300, 2000 + n, 80) for n in range(500)]
        for key in keys:
            f.insert(key)
        assert all(f.contains(key) for key in keys)

    def test_insert_idempotent_on_bits(self):
        f = BloomFilter(m=DEFAULT_M, hash_id=1)
        key = fk(1, 2, 1000, 80)
        f.insert(key)
        once = f.bits
        f.insert(key)
        assert f.bits == once and f.popcount() == 1
        assert f.inserted_count == 2

    def test_popcount_bounds(self):
        f = BloomFilter(m=DEFAULT_M, hash_id=1)
        for n in range(200):
            f.insert(fk(n, n + 1, 1024 + n, 80))
        assert 0 < f.popcount() <= 200

    def test_clear(self):
        f = BloomFilter(m=DEFAULT_M, hash_id=1)
        f.insert(fk(1, 2, 1000, 80))
        f.clear()
        assert f.popcount() == 0 and f.inserted_count == 0
        assert not f.contains(fk(1, 2, 1000, 80))


class TestBloomPair:
    def test_requires_distinct_hash_ids(self):
        with pytest.raises(ValueError):
            BloomPair(BloomFilter(hash_id=1), BloomFilter(hash_id=1))

    def test_requires_matching_size(self):
        with pytest.raises(ValueError):
            BloomPair(BloomFilter(m=256, hash_id=1),
                      BloomFilter(m=512, hash_id=2))

    def test_no_false_negatives(self):
        pair = BloomPair()
        keys = [fk(n % 300, n // 300, 2000 + n % 40000, 80)
                for n in range(2000)]
        for key in keys:
            pair.insert(key)
        assert all(pair.contains(key) for key in keys)

    def test_conjunction_of_members(self):
        """The pair answers yes exactly when both member filters do."""
        pair = BloomPair.sized(256)
        rng = random.Random(7)
        inserted = [fk(rng.randrange(100), rng.randrange(100),
                       rng.randrange(1024, 60000), 80) for _ in range(120)]
        for key in inserted:
            pair.insert(key)
        probes = inserted + [fk(rng.randrange(100), 200 + rng.randrange(100),
                                rng.randrange(1024, 60000), 443)
                             for _ in range(500)]
        for key in probes:
            both = pair.f1.contains(key) and pair.f2.contains(key)
            assert pair.contains(key) == both

    def test_pair_no_looser_than_single(self):
        """Requiring both hashes can only shrink the accepted set."""
        pair = BloomPair.sized(512)
        for n in range(300):
            pair.insert(fk(n % 50, n // 50, 1024 + n, 80))
        single_yes = pair_yes = 0
        for n in range(3000):
            probe = fk(60 + n % 50, 60 + n // 50, 1024 + n % 50000, 443)
            single_yes += pair.f1.contains(probe)
            pair_yes += pair.contains(probe)
        assert pair_yes <= single_yes

    def test_false_positive_rate_near_analytic(self):
        """n=1000 insertions into m=4096 gives an AND-of-two-hashes false
        positive rate of (1 - e^(-1000/4096))^2 ~= 0.0469; measure with 10^5
        fresh probes and require agreement within +/-0.01."""
        pair = BloomPair.sized(4096)
        for n in range(1000):
            pair.insert(fk(n % 200, n // 200, 1024 + n, 80))
        probes = 100_000
        hits = 0
        for n in range(probes):
            probe = fk(300 + n % 200, 300 + n // 200, 1024 + n % 60000, 443)
            hits += pair.contains(probe)
        analytic = (1.0 - math.exp(-1000 / 4096)) ** 2
        assert abs(hits / probes - analytic) <= 0.01

    def test_clear(self):
        pair = BloomPair()
        pair.insert(fk(1, 2, 1000, 80))
        pair.clear()
        assert not pair.contains(fk(1, 2, 1000, 80))
        assert pair.f1.popcount() == 0 and pair.f2.popcount() == 0
