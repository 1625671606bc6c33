package com.sample.annotated;

import java.util.ArrayList;
import java.util.List;

class Handler {
    @Override
    public String toString() {
        return "Handler";
    }

    @SuppressWarnings({"unchecked", "rawtypes"})
    List<String> coerce(Object raw) {
        return (List) raw;
    }
}
