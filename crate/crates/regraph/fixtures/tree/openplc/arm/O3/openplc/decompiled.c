//
// This file was generated by the Retargetable Decompiler
// Website: https://retdec.com
//

#include <stdbool.h>
#include <stdint.h>

// ------------------- Function Prototypes --------------------

int32_t __current_time(void);
void __normalize_timespec(int32_t * a1);
int32_t __time_add(int32_t a1, int32_t a2, int32_t a3, int32_t a4);
int32_t __time_sub(int32_t a1, int32_t a2, int32_t a3, int32_t a4);
void INTEGRAL_body__(int32_t * a1);
void TON_body__(int32_t * a1);
void PROG0_body__(int32_t * a1);

// ------------------------ Functions -------------------------

// Address range: 0x0 - 0x5c
void __normalize_timespec(int32_t * a1) {
    int32_t * v1 = (int32_t *)((int32_t)a1 + 4); // 0x4
    int32_t v2 = *v1; // 0x4
    int32_t v3 = *a1; // 0x8
    if (v2 < -0x3b9aca00 || v3 > 0 && v2 < 0) {
        // 0x18
        *a1 = v3 - 1;
        v2 += 0x3b9aca00;
        *v1 = v2;
        v3--;
    }
    if (v2 > 0x3b9aca00 || v3 < 0 && v2 > 0) {
        // 0x3c
        *a1 = v3 + 1;
        *v1 = v2 - 0x3b9aca00;
    }
}

// Address range: 0x60 - 0x98
int32_t __time_add(int32_t a1, int32_t a2, int32_t a3, int32_t a4) {
    int32_t v1 = a1 + a3; // 0x70
    int32_t v2 = a2 + a4; // 0x78
    __normalize_timespec(&v1);
    return v1;
}

// Address range: 0xa0 - 0xd8
int32_t __time_sub(int32_t a1, int32_t a2, int32_t a3, int32_t a4) {
    int32_t v1 = a1 - a3; // 0xb0
    int32_t v2 = a2 - a4; // 0xb8
    __normalize_timespec(&v1);
    return v1;
}

// Address range: 0xe0 - 0x140
void INTEGRAL_body__(int32_t * a1) {
    char * v1 = (char *)((int32_t)a1 + 1); // 0xe4
    if (*(char *)a1 == 0) {
        // 0xec
        *v1 = 0;
        return;
    }
    // 0xf0
    *v1 = 1;
    char v2 = *(char *)((int32_t)a1 + 3); // 0xf4
    *(char *)((int32_t)a1 + 16) = (char)(v2 == 0);
    float * v3 = (float *)((int32_t)a1 + 20); // 0x100
    if (v2 != 0) {
        // 0x108
        *v3 = *(float *)((int32_t)a1 + 8);
        return;
    }
    // 0x110
    if (*(char *)((int32_t)a1 + 2) != 0) {
        // 0x118
        *v3 = *v3 + *(float *)((int32_t)a1 + 4) * *(float *)((int32_t)a1 + 12);
    }
}

// Address range: 0x144 - 0x19c
void TON_body__(int32_t * a1) {
    int32_t v1 = __current_time(); // 0x148
    if (*(char *)a1 == 0) {
        // 0x150
        *(char *)((int32_t)a1 + 1) = 0;
        *(int32_t *)((int32_t)a1 + 8) = 0;
        *(int32_t *)((int32_t)a1 + 12) = v1;
        return;
    }
    int32_t v2 = v1 - *(int32_t *)((int32_t)a1 + 12); // 0x168
    int32_t * v3 = (int32_t *)((int32_t)a1 + 8); // 0x168
    *v3 = v2;
    int32_t v4 = *(int32_t *)((int32_t)a1 + 4); // 0x170
    if (v2 >= v4) {
        // 0x174
        *v3 = v4;
        *(char *)((int32_t)a1 + 1) = 1;
    }
}

// Address range: 0x1a0 - 0x20c
void PROG0_body__(int32_t * a1) {
    char v1 = *(char *)a1; // 0x1a4
    int32_t * v2 = (int32_t *)((int32_t)a1 + 4); // 0x1a8
    *(char *)v2 = (char)(v1 == 0);
    *(int32_t *)((int32_t)a1 + 8) = 500;
    TON_body__(v2);
    int32_t * v3 = (int32_t *)((int32_t)a1 + 20); // 0x1b8
    *(char *)v3 = *(char *)a1;
    *(int32_t *)((int32_t)a1 + 24) = 500;
    TON_body__(v3);
    if (*(char *)((int32_t)a1 + 5) != 0) {
        // 0x1d8
        *(char *)a1 = 1;
    }
    if (*(char *)((int32_t)a1 + 21) != 0) {
        // 0x1e8
        *(char *)a1 = 0;
    }
    // 0x1f4
    *(char *)((int32_t)a1 + 1) = *(char *)a1;
}

// --------------- Dynamically Linked Functions ---------------

// int32_t __current_time(void);

// --------------------- Meta-Information ---------------------

// Detected compiler/packer: clang (14.0.0) ARM
// Detected functions: 7
