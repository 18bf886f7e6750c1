"""Sum-of-trees ensemble with a regularizing tree prior and weighted backfitting.

Each tree is a binary partition of the covariate space; a forest sums the
leaf values reached by an input across all trees.  Trees are updated one at
a time by Metropolis-Hastings against the residual of the remaining trees,
with leaf values integrated out analytically under heteroskedastic Gaussian
observation weights, then redrawn from their Gaussian conditionals.
"""

import numpy as np

from .errors import DomainError

__all__ = [
    "Node",
    "Tree",
    "Forest",
    "depth_split_probability",
    "leaf_prior_scale",
    "draw_prior_tree",
]

MOVE_WEIGHTS = {"grow": 0.25, "prune": 0.25, "change": 0.40, "swap": 0.10}


def depth_split_probability(depth, alpha, zeta):
    """Probability that a node at the given depth is non-terminal."""
    return alpha * (1.0 + depth) ** (-zeta)


def leaf_prior_scale(y_min, y_max, gamma, n_trees):
    """Leaf-value prior standard deviation (y_max - y_min) / (2 gamma sqrt(S))."""
    if y_max <= y_min:
        raise DomainError("response range must be positive")
    return (y_max - y_min) / (2.0 * gamma * np.sqrt(n_trees))


class Node:
    """Binary tree node; feature == -1 marks a leaf."""

    __slots__ = ("feature", "threshold", "left", "right", "value", "depth", "idx")

    def __init__(self, depth, value=0.0):
        self.feature = -1
        self.threshold = 0.0
        self.left = None
        self.right = None
        self.value = value
        self.depth = depth
        self.idx = None  # training rows routed to this node (leaves only)

    def is_leaf(self):
        return self.feature < 0

    def clone(self):
        out = Node(self.depth, self.value)
        out.feature = self.feature
        out.threshold = self.threshold
        out.idx = self.idx
        if not self.is_leaf():
            out.left = self.left.clone()
            out.right = self.right.clone()
        return out


class Tree:
    """A single decision tree plus cached training-row assignments."""

    def __init__(self, root=None):
        self.root = root if root is not None else Node(0)

    def leaves(self):
        out = []
        stack = [self.root]
        while stack:
            n = stack.pop()
            if n.is_leaf():
                out.append(n)
            else:
                stack.extend((n.left, n.right))
        return out

    def internals(self):
        out = []
        stack = [self.root]
        while stack:
            n = stack.pop()
            if not n.is_leaf():
                out.append(n)
                stack.extend((n.left, n.right))
        return out

    def prunable(self):
        return [n for n in self.internals() if n.left.is_leaf() and n.right.is_leaf()]

    def swappable(self):
        """(parent, child) pairs of internal nodes."""
        pairs = []
        for n in self.internals():
            for c in (n.left, n.right):
                if not c.is_leaf():
                    pairs.append((n, c))
        return pairs

    def n_leaves(self):
        return len(self.leaves())

    def max_depth(self):
        return max(n.depth for n in self.leaves())

    def assign(self, x, node=None, idx=None):
        """Route rows of x down the tree, caching index sets on the leaves."""
        if node is None:
            node = self.root
            idx = np.arange(x.shape[0])
        if node.is_leaf():
            node.idx = idx
            return
        go_left = x[idx, node.feature] <= node.threshold
        self.assign(x, node.left, idx[go_left])
        self.assign(x, node.right, idx[~go_left])

    def predict(self, x):
        out = np.zeros(x.shape[0])
        stack = [(self.root, np.arange(x.shape[0]))]
        while stack:
            node, idx = stack.pop()
            if idx.size == 0:
                continue
            if node.is_leaf():
                out[idx] = node.value
                continue
            go_left = x[idx, node.feature] <= node.threshold
            stack.append((node.left, idx[go_left]))
            stack.append((node.right, idx[~go_left]))
        return out


def _leaf_logml(r, w, idx, v2):
    """Log marginal likelihood of one leaf with the value integrated out.

    r are residuals, w = 1/s^2 precision weights, v2 the leaf prior variance.
    """
    ri = r[idx]
    wi = w[idx]
    a = wi.sum()
    b = (ri * wi).sum()
    c = (ri * ri * wi).sum()
    return (
        -0.5 * c
        + 0.5 * np.log(wi).sum()
        - 0.5 * idx.size * np.log(2.0 * np.pi)
        - 0.5 * np.log1p(v2 * a)
        + 0.5 * b * b / (a + 1.0 / v2)
    )


def _subtree_logml(node, r, w, v2):
    total = 0.0
    stack = [node]
    while stack:
        n = stack.pop()
        if n.is_leaf():
            if n.idx.size == 0:
                return -np.inf
            total += _leaf_logml(r, w, n.idx, v2)
        else:
            stack.extend((n.left, n.right))
    return total


def draw_prior_tree(rng, n_features, split_values, alpha, zeta, max_depth=12):
    """Simulate a tree structure from the regularization prior."""

    def grow(depth):
        node = Node(depth)
        if depth < max_depth and rng.random() < depth_split_probability(depth, alpha, zeta):
            j = int(rng.integers(n_features))
            vals = split_values[j]
            if len(vals) == 0:
                return node
            node.feature = j
            node.threshold = vals[int(rng.integers(len(vals)))]
            node.left = grow(depth + 1)
            node.right = grow(depth + 1)
        return node

    return Tree(grow(0))


class Forest:
    """Ensemble of trees owned by one (country, quantile) chain.

    Parameters
    ----------
    x : ndarray (T, K)
        Training covariates; split thresholds are drawn from observed values.
    y_min, y_max : float
        Observed response range used for the leaf-value prior scale.
    n_trees : int
    alpha, zeta : float
        Depth-split prior parameters.
    gamma : float
        Leaf-scale divisor.
    """

    def __init__(self, x, y_min, y_max, n_trees=250, alpha=0.95, zeta=2.0, gamma=2.0):
        self.n_trees = n_trees
        self.alpha = alpha
        self.zeta = zeta
        self.gamma = gamma
        self.v = leaf_prior_scale(y_min, y_max, gamma, n_trees)
        self.x = x
        if x is not None:
            self.n_features = x.shape[1]
            # drop each feature's maximum so a split always leaves the right child non-empty
            self.split_values = [np.unique(x[:, j])[:-1] for j in range(x.shape[1])]
            self.fits = np.zeros((n_trees, x.shape[0]))
        else:
            self.n_features = None
            self.split_values = None
            self.fits = None
        self.trees = [Tree() for _ in range(n_trees)]
        if x is not None:
            for t in self.trees:
                t.assign(x)

    # ------------------------------------------------------------------ fits

    def total_fit(self):
        """Current ensemble fit on the training sample."""
        return self.fits.sum(axis=0)

    def predict(self, x_new):
        """Ensemble prediction for new covariate rows (or a single vector)."""
        x_new = np.atleast_2d(np.asarray(x_new, dtype=float))
        if self.n_features is not None and x_new.shape[1] != self.n_features:
            raise DomainError(
                f"expected {self.n_features} covariates, got {x_new.shape[1]}"
            )
        out = np.zeros(x_new.shape[0])
        for t in self.trees:
            out += t.predict(x_new)
        return out if out.size > 1 else float(out[0])

    # ----------------------------------------------------------------- moves

    def _move_probs(self, tree):
        avail = {"grow": MOVE_WEIGHTS["grow"]}
        if tree.n_leaves() > 1:
            avail["prune"] = MOVE_WEIGHTS["prune"]
            avail["change"] = MOVE_WEIGHTS["change"]
            if tree.swappable():
                avail["swap"] = MOVE_WEIGHTS["swap"]
        z = sum(avail.values())
        return {k: v / z for k, v in avail.items()}

    def _split_prob(self, depth):
        return depth_split_probability(depth, self.alpha, self.zeta)

    def _try_grow(self, tree, r, w, rng):
        leaves = tree.leaves()
        leaf = leaves[int(rng.integers(len(leaves)))]
        j = int(rng.integers(self.n_features))
        vals = self.split_values[j]
        if len(vals) == 0:
            return False
        c = vals[int(rng.integers(len(vals)))]
        idx = leaf.idx
        go_left = self.x[idx, j] <= c
        left_idx, right_idx = idx[go_left], idx[~go_left]
        if left_idx.size == 0 or right_idx.size == 0:
            return False
        d = leaf.depth
        v2 = self.v**2
        log_ml = (
            _leaf_logml(r, w, left_idx, v2)
            + _leaf_logml(r, w, right_idx, v2)
            - _leaf_logml(r, w, idx, v2)
        )
        ps, ps1 = self._split_prob(d), self._split_prob(d + 1)
        log_prior = np.log(ps) + 2.0 * np.log1p(-ps1) - np.log1p(-ps)
        # reverse: prune move in the grown tree
        parent_prunable = any(leaf in (n.left, n.right) for n in tree.prunable())
        n_prunable_after = len(tree.prunable()) + 1 - int(parent_prunable)
        fwd = self._move_probs(tree)["grow"] / len(leaves)
        # swap may still be unavailable in the grown tree
        grown_tree_has_swap = bool(tree.swappable()) or (leaf is not tree.root)
        z = sum(v for k, v in MOVE_WEIGHTS.items() if k != "swap" or grown_tree_has_swap)
        rev = (MOVE_WEIGHTS["prune"] / z) / n_prunable_after
        log_alpha = log_prior + log_ml + np.log(rev) - np.log(fwd)
        if np.log(rng.random()) < log_alpha:
            leaf.feature = j
            leaf.threshold = c
            leaf.left = Node(d + 1)
            leaf.right = Node(d + 1)
            leaf.left.idx = left_idx
            leaf.right.idx = right_idx
            leaf.idx = None
            return True
        return False

    def _try_prune(self, tree, r, w, rng):
        cand = tree.prunable()
        if not cand:
            return False
        node = cand[int(rng.integers(len(cand)))]
        idx = np.concatenate([node.left.idx, node.right.idx])
        v2 = self.v**2
        log_ml = (
            _leaf_logml(r, w, idx, v2)
            - _leaf_logml(r, w, node.left.idx, v2)
            - _leaf_logml(r, w, node.right.idx, v2)
        )
        d = node.depth
        ps, ps1 = self._split_prob(d), self._split_prob(d + 1)
        log_prior = np.log1p(-ps) - np.log(ps) - 2.0 * np.log1p(-ps1)
        fwd = self._move_probs(tree)["prune"] / len(cand)
        n_leaves_after = tree.n_leaves() - 1
        pruned_single = n_leaves_after == 1
        if pruned_single:
            rev = 1.0 / n_leaves_after
        else:
            # pruned tree still has internals; recompute its move normalization
            pruned_has_swap = len(tree.swappable()) - int(
                any(node in (p.left, p.right) for p in tree.internals())
            ) > 0
            z = sum(
                v for k, v in MOVE_WEIGHTS.items() if k != "swap" or pruned_has_swap
            )
            rev = (MOVE_WEIGHTS["grow"] / z) / n_leaves_after
        log_alpha = log_prior + log_ml + np.log(rev) - np.log(fwd)
        if np.log(rng.random()) < log_alpha:
            node.feature = -1
            node.left = None
            node.right = None
            node.idx = np.sort(idx)
            return True
        return False

    def _try_change(self, tree, r, w, rng):
        internals = tree.internals()
        if not internals:
            return False
        node = internals[int(rng.integers(len(internals)))]
        j = int(rng.integers(self.n_features))
        vals = self.split_values[j]
        if len(vals) == 0:
            return False
        c = vals[int(rng.integers(len(vals)))]
        return self._replace_subtree(tree, node, j, c, r, w, rng)

    def _replace_subtree(self, tree, node, j, c, r, w, rng, swap_child=None):
        """Propose a modified copy of the subtree at ``node`` and MH-accept it."""
        prop = node.clone()
        prop.feature = j
        prop.threshold = c
        if swap_child is not None:
            side, jc, cc = swap_child
            child = prop.left if side == "left" else prop.right
            child.feature = jc
            child.threshold = cc
        sub_idx = _collect_idx(node)
        _assign_subtree(prop, self.x, sub_idx)
        v2 = self.v**2
        new_ml = _subtree_logml(prop, r, w, v2)
        if not np.isfinite(new_ml):
            return False
        old_ml = _subtree_logml(node, r, w, v2)
        if np.log(rng.random()) < new_ml - old_ml:
            node.feature = prop.feature
            node.threshold = prop.threshold
            node.left = prop.left
            node.right = prop.right
            node.idx = prop.idx
            return True
        return False

    def _try_swap(self, tree, r, w, rng):
        pairs = tree.swappable()
        if not pairs:
            return False
        parent, child = pairs[int(rng.integers(len(pairs)))]
        side = "left" if child is parent.left else "right"
        return self._replace_subtree(
            tree,
            parent,
            child.feature,
            child.threshold,
            r,
            w,
            rng,
            swap_child=(side, parent.feature, parent.threshold),
        )

    # ----------------------------------------------------------------- sweep

    def backfit_sweep(self, r, s2, rng):
        """One backfitting pass: update every tree's structure and leaf values.

        Parameters
        ----------
        r : ndarray (T,)
            Partial residuals excluding all non-tree model components.
        s2 : ndarray (T,)
            Per-observation variances of the residuals.
        rng : numpy Generator
        """
        s2 = np.asarray(s2, dtype=float)
        if np.any(s2 <= 0.0):
            raise DomainError("observation weights must be strictly positive")
        w = 1.0 / s2
        allfit = self.total_fit()
        v2 = self.v**2
        for s, tree in enumerate(self.trees):
            r_tree = r - (allfit - self.fits[s])
            probs = self._move_probs(tree)
            moves = list(probs)
            u = rng.random()
            acc = 0.0
            for m in moves:
                acc += probs[m]
                if u < acc:
                    move = m
                    break
            else:
                move = moves[-1]
            getattr(self, f"_try_{move}")(tree, r_tree, w, rng)
            # redraw leaf values from their Gaussian conditionals
            new_fit = np.empty_like(r)
            for leaf in tree.leaves():
                wi = w[leaf.idx]
                prec = 1.0 / v2 + wi.sum()
                mean = (r_tree[leaf.idx] * wi).sum() / prec
                leaf.value = mean + rng.standard_normal() / np.sqrt(prec)
                new_fit[leaf.idx] = leaf.value
            allfit += new_fit - self.fits[s]
            self.fits[s] = new_fit

    # --------------------------------------------------------- serialization

    def to_arrays(self):
        """Flatten the forest into preorder node arrays (version 1 layout)."""
        feats, thresh, vals, sizes = [], [], [], []
        for tree in self.trees:
            n0 = len(feats)
            stack = [tree.root]
            while stack:
                node = stack.pop()
                feats.append(node.feature)
                thresh.append(node.threshold)
                vals.append(node.value)
                if not node.is_leaf():
                    stack.append(node.right)
                    stack.append(node.left)
            sizes.append(len(feats) - n0)
        return {
            "feature": np.asarray(feats, dtype=np.int32),
            "threshold": np.asarray(thresh, dtype=float),
            "value": np.asarray(vals, dtype=float),
            "tree_size": np.asarray(sizes, dtype=np.int64),
            "leaf_scale": np.asarray([self.v]),
        }

    @classmethod
    def from_arrays(cls, arrays):
        """Rebuild a prediction-only forest from :meth:`to_arrays` output."""
        forest = cls.__new__(cls)
        forest.x = None
        forest.split_values = None
        forest.fits = None
        forest.v = float(arrays["leaf_scale"][0])
        feats = arrays["feature"]
        thresh = arrays["threshold"]
        vals = arrays["value"]
        sizes = arrays["tree_size"]
        forest.n_trees = len(sizes)
        forest.n_features = None
        forest.trees = []
        pos = 0

        def read(depth):
            nonlocal pos
            node = Node(depth, float(vals[pos]))
            node.feature = int(feats[pos])
            node.threshold = float(thresh[pos])
            pos += 1
            if not node.is_leaf():
                node.left = read(depth + 1)
                node.right = read(depth + 1)
            return node

        for size in sizes:
            end = pos + size
            forest.trees.append(Tree(read(0)))
            assert pos == end
        return forest


def _collect_idx(node):
    out = []
    stack = [node]
    while stack:
        n = stack.pop()
        if n.is_leaf():
            out.append(n.idx)
        else:
            stack.extend((n.left, n.right))
    return np.sort(np.concatenate(out))


def _assign_subtree(node, x, idx):
    if node.is_leaf():
        node.idx = idx
        return
    go_left = x[idx, node.feature] <= node.threshold
    node.idx = None
    _assign_subtree(node.left, x, idx[go_left])
    _assign_subtree(node.right, x, idx[~go_left])
