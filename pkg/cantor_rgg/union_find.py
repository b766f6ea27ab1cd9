class UnionFind:
    """Disjoint sets over the integers 0..size-1 with union by rank and path compression

    Examples
    --------
    >>> uf = UnionFind(5)
    >>> uf.union(0, 1)
    >>> uf.union(3, 4)
    >>> uf.find(1) == uf.find(0)
    True
    >>> uf.components
    3
    """

    def __init__(self, size: int):
        self.parent = list(range(size))
        self.rank = [0] * size
        self.components = size

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        # path compression
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, x: int, y: int) -> None:
        px = self.find(x)
        py = self.find(y)
        if px == py:
            return
        # Attach the smaller rank tree under the root of the larger rank tree
        if self.rank[px] < self.rank[py]:
            self.parent[px] = py
        elif self.rank[px] > self.rank[py]:
            self.parent[py] = px
        else:
            self.parent[py] = px
            self.rank[px] += 1
        self.components -= 1
