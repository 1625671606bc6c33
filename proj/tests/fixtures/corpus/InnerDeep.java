package com.sample.deep;

class L1 {
    void top() {
    }

    class L2 {
        void middle() {
        }

        class L3 {
            void bottom() {
            }
        }
    }
}
