package com.sample.generics;

import java.util.List;
import java.util.Map;

class Algo {
    <T extends Comparable<T>> T max(List<T> xs) {
        T best = xs.get(0);
        for (T x : xs) {
            if (x.compareTo(best) > 0) {
                best = x;
            }
        }
        return best;
    }

    Map<String, List<Integer>> index(List<String> keys) {
        return null;
    }
}
