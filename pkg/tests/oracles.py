"""Brute-force reference implementations the test suite checks against.

Everything here trades efficiency for obviousness: full sorts, exhaustive
enumeration, complete tree walks. The library must agree with these exactly.
"""

import math

from deepck.propagation import Attribute, TaxonomyTree
from deepck.retrieval import DEFAULT_STOPWORDS, find_sentences, overlap_score
from deepck.triples import rendered_char_spans


def brute_force_depth_rank(triple, backend):
    """Sort every candidate token per tail position and average the ranks."""
    text, _head_span, tail_span = rendered_char_spans(triple)
    seq = backend.tokenize(text)
    ranks = []
    for pos, (start, _end) in enumerate(seq.offsets):
        if start < tail_span[0]:
            continue
        dist = backend.next_token_logprobs(seq.ids[:pos])
        order = sorted(range(len(dist.logprobs)),
                       key=lambda i: (-dist.logprobs[i], i))
        ranks.append(order.index(seq.ids[pos]) + 1)
    return sum(ranks) / len(ranks)


def brute_force_evidence(triple, corpus, k, stopwords=DEFAULT_STOPWORDS):
    """Enumerate every sentence pair, sort, truncate."""
    heads = find_sentences(corpus, triple.head)
    tails = find_sentences(corpus, triple.tail)
    rows = sorted(
        ((overlap_score(corpus.tokens(h), corpus.tokens(t), stopwords), h, t)
         for h in heads for t in tails),
        key=lambda r: (-r[0], r[1], r[2]),
    )
    return [(h, t, ov) for ov, h, t in rows[:k]]


def random_forest(rng, size):
    """Random parent assignment among earlier nodes keeps the graph acyclic."""
    names = ["n%d" % i for i in range(size)]
    edges = []
    for i, name in enumerate(names[1:], start=1):
        parent = rng.randrange(i + 1)
        if parent < i:
            edges.append((name, names[parent]))
    return TaxonomyTree(edges) if edges else None


def oracle_horizontal(tree, sources, max_distance):
    """All smallest-height equal-depth relatives, checked pairwise."""
    out = {}
    for c in sources:
        head = c.triple.head
        if head not in tree:
            continue
        chain_h = tree.ancestors(head)
        for term in tree.terms():
            if term == head:
                continue
            chain_t = tree.ancestors(term)
            for g in range(1, max_distance + 1):
                if g <= len(chain_h) and g <= len(chain_t) and chain_h[g - 1] == chain_t[g - 1]:
                    triple = Attribute(c.triple.relation, c.triple.tail).on_head(term)
                    out.setdefault(triple.key(), ("horizontal", head, g))
                    break
    return out


def oracle_vertical(tree, sources, max_distance):
    """All descendants within the distance bound, checked per node."""
    out = {}
    for c in sources:
        head = c.triple.head
        if head not in tree:
            continue
        for term in tree.terms():
            chain = tree.ancestors(term)
            if head in chain[:max_distance]:
                triple = Attribute(c.triple.relation, c.triple.tail).on_head(term)
                out.setdefault(triple.key(), ("vertical", head, chain.index(head) + 1))
    return out


def exhaustive_beam(prefix_ids, backend, max_len):
    """Walk the whole continuation tree and sort like the beam."""
    eot = backend.vocab.eot_id
    results = []

    def expand(ids, score, depth):
        if depth == max_len:
            results.append((ids, score))
            return
        dist = backend.next_token_logprobs(list(prefix_ids) + list(ids))
        for tok, lp in enumerate(dist.logprobs):
            lp = float(lp)
            if lp == -math.inf:
                continue
            if tok == eot:
                results.append((ids, score + lp))
            else:
                expand(ids + (tok,), score + lp, depth + 1)

    expand((), 0.0, 0)
    results.sort(key=lambda r: (-r[1], r[0]))
    return results
