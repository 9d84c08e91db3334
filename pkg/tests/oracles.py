"""Naive reference implementations used to cross-check the library."""

from pirho.opsem import canonical, res_steps, step_cost
from pirho.resources import observe_action
from pirho.safety import Behavior


def reachable(p, sigma, universe, k):
    """Every configuration reachable from ``(p, sigma)`` within cost ``k``."""
    seen = {}
    todo = [(canonical(p), sigma, k)]
    while todo:
        q, s, left = todo.pop()
        if seen.get((q, s), -1) >= left:
            continue
        seen[(q, s)] = left
        for st in res_steps(q, s, universe):
            c = step_cost(st.action, st.via_comm)
            if c <= left:
                todo.append((canonical(st.successor), st.next_resource, left - c))
    return set(seen)


def naive_costed(p, sigma, universe, k):
    """Observable traces with the least cost reaching them, by plain
    depth-first search over resource steps.

    Every observable element costs at least 1, so meeting a configuration
    again on the current path with the same budget means a silent loop.
    """
    out = {(): 0}

    def go(q, s, left, prefix, path):
        key = (canonical(q), s)
        if path.get(key) == left:
            return
        path = dict(path)
        path[key] = left
        for st in res_steps(q, s, universe):
            c = step_cost(st.action, st.via_comm)
            if c > left:
                continue
            t = prefix + observe_action(st.action, s)
            spent = k - left + c
            if out.get(t, spent + 1) > spent:
                out[t] = spent
            go(st.successor, st.next_resource, left - c, t, path)

    go(p, sigma, k, (), {})
    return out


def naive_traces(p, sigma, universe, k):
    return frozenset(naive_costed(p, sigma, universe, k))


def op_behavior(p, universe, k):
    """The operational observation of ``p`` packaged as a behavior."""
    return Behavior(lambda s: naive_costed(p, s, universe, k), tuple(sorted(universe)), k)
