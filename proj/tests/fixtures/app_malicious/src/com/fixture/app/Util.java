package com.fixture.app;

public class Util {
    static String tag = "app";

    static void log(String msg) {
        System.out.println(tag + ": " + msg);
    }
}
