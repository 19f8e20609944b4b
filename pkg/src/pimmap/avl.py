"""Balanced ordered map (AVL tree), used as the tree-structured baseline."""

from __future__ import annotations

from typing import Optional


class _Node:
    __slots__ = ("key", "value", "left", "right", "height")

    def __init__(self, key: int, value: int):
        self.key = key
        self.value = value
        self.left: Optional[_Node] = None
        self.right: Optional[_Node] = None
        self.height = 1


def _height(node: Optional[_Node]) -> int:
    return node.height if node else 0


def _fix(node: _Node) -> None:
    node.height = 1 + max(_height(node.left), _height(node.right))


def _balance(node: _Node) -> int:
    return _height(node.left) - _height(node.right)


def _rot_right(node: _Node) -> _Node:
    pivot = node.left
    node.left = pivot.right
    pivot.right = node
    _fix(node)
    _fix(pivot)
    return pivot


def _rot_left(node: _Node) -> _Node:
    pivot = node.right
    node.right = pivot.left
    pivot.left = node
    _fix(node)
    _fix(pivot)
    return pivot


def _rebalance(node: _Node) -> _Node:
    _fix(node)
    bal = _balance(node)
    if bal > 1:
        if _balance(node.left) < 0:
            node.left = _rot_left(node.left)
        return _rot_right(node)
    if bal < -1:
        if _balance(node.right) > 0:
            node.right = _rot_right(node.right)
        return _rot_left(node)
    return node


class AvlMap:
    def __init__(self):
        self._root: Optional[_Node] = None
        self._count = 0

    def __len__(self) -> int:
        return self._count

    def get(self, key: int) -> Optional[int]:
        node = self._root
        while node:
            if key < node.key:
                node = node.left
            elif key > node.key:
                node = node.right
            else:
                return node.value
        return None

    def insert(self, key: int, value: int) -> None:
        self._root = self._insert(self._root, key, value)

    def _insert(self, node: Optional[_Node], key: int, value: int) -> _Node:
        if node is None:
            self._count += 1
            return _Node(key, value)
        if key < node.key:
            node.left = self._insert(node.left, key, value)
        elif key > node.key:
            node.right = self._insert(node.right, key, value)
        else:
            node.value = value
            return node
        return _rebalance(node)

    def remove(self, key: int) -> bool:
        self._root, removed = self._remove(self._root, key)
        if removed:
            self._count -= 1
        return removed

    def _remove(self, node: Optional[_Node], key: int):
        if node is None:
            return None, False
        if key < node.key:
            node.left, removed = self._remove(node.left, key)
        elif key > node.key:
            node.right, removed = self._remove(node.right, key)
        else:
            removed = True
            if node.left is None:
                return node.right, True
            if node.right is None:
                return node.left, True
            successor = node.right
            while successor.left:
                successor = successor.left
            node.key, node.value = successor.key, successor.value
            node.right, _ = self._remove(node.right, successor.key)
        return _rebalance(node), removed

    def items(self):
        stack, node = [], self._root
        while stack or node:
            while node:
                stack.append(node)
                node = node.left
            node = stack.pop()
            yield node.key, node.value
            node = node.right

    def check_balanced(self) -> int:
        """Verify AVL shape; returns the height. For tests."""
        def walk(node):
            if node is None:
                return 0
            lh, rh = walk(node.left), walk(node.right)
            assert abs(lh - rh) <= 1, f"unbalanced at key {node.key}"
            assert node.height == 1 + max(lh, rh), f"stale height at {node.key}"
            return node.height
        return walk(self._root)
